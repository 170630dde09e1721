import logging

from src.SPDC_g2.logs import ColorFormatter, package_logger, set_verbose_warnings, set_verbosity


def test_color_formatter():
    """
    Test that messages are wrapped in the color code of their level.
    """

    formatter = ColorFormatter("%(levelname)s: %(message)s")
    record = logging.LogRecord("SPDC_g2", logging.WARNING, __file__, 1, "careful", None, None)

    assert formatter.format(record) == "\033[93mWARNING: careful\033[0m"


def test_verbosity_switches():
    """
    Test that warnings can be silenced and restored, and that the level can be set directly.
    """

    try:
        set_verbose_warnings(False)
        assert package_logger.level == logging.ERROR

        set_verbose_warnings(True)
        assert package_logger.level == logging.WARNING

        set_verbosity(logging.INFO)
        assert package_logger.level == logging.INFO
    finally:
        set_verbose_warnings(True)


def test_single_console_handler():
    """
    Test that the package logger carries exactly one console handler.
    """
    assert sum(getattr(handler, "_spdc_g2", False) for handler in package_logger.handlers) == 1
