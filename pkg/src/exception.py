import sys


def error_message_detail(error: BaseException, error_detail=sys) -> str:
    """Failure text with the file and line of the innermost frame of the active traceback."""
    _, _, exc_tb = error_detail.exc_info()
    if exc_tb is None:
        exc_tb = error.__traceback__
    if exc_tb is None:
        return f"Error message[{error}]"
    while exc_tb.tb_next is not None:
        exc_tb = exc_tb.tb_next
    file_name = exc_tb.tb_frame.f_code.co_filename
    return "Error occured in python script name [{0}] line number [{1}] error message[{2}]".format(
        file_name, exc_tb.tb_lineno, str(error)
    )
