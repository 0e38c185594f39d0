from loguru import logger


class SafeRun:
    r"""
    Context manager around side artifacts of a run (sample grids, loss curves).
    With `raise_error=False`, an exception raised in the block is logged with its
    traceback and swallowed, and `failed` is set; the run goes on.

    Example:
        ```
        with SafeRun(name="Loss curves", raise_error=False) as guard:
            plot_loss_curves(...)
        if guard.failed:
            ...
        ```
    """

    def __init__(self, name: str, raise_error: bool = True) -> None:
        self.name = name
        self.raise_error = raise_error
        self.failed = False

    def __enter__(self) -> "SafeRun":
        return self

    def __exit__(self, exc_type, exc_value, traceback) -> bool:
        if exc_type is None:
            return False
        self.failed = True
        if self.raise_error:
            logger.error(f"{self.name} failed")
            return False
        logger.opt(exception=(exc_type, exc_value, traceback)).warning(f"{self.name} failed, skipped")
        return True
