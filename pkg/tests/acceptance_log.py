"""Pass/fail registry shared by the acceptance tests and the terminal summary."""

import functools

RESULTS: dict[int, tuple[str, bool, str]] = {}


def criterion(number: int, title: str):
    """Record the outcome of an acceptance test and print one line for it."""

    def wrap(test):
        @functools.wraps(test)
        def run(*args, **kwargs):
            try:
                test(*args, **kwargs)
            except BaseException as exc:
                RESULTS[number] = (title, False, str(exc).splitlines()[0] if str(exc) else type(exc).__name__)
                print(f"criterion {number}: FAIL {title}")
                raise
            RESULTS[number] = (title, True, "")
            print(f"criterion {number}: PASS {title}")

        return run

    return wrap
