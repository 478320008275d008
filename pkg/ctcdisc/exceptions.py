"""
Exceptions.

Validation and config errors carry context as exception notes
(e.g. the config file or the index of the failing isometry).
The command line tool prints them below the error message.
"""

__all__ = [
    'add_note',
    'CtcdiscError', 'CtcdiscValidationError', 'CtcdiscConfigError',
    'CtcdiscResourceError', 'CtcdiscConvergenceError']

class CtcdiscError(Exception):
    """Base class for ctcdisc exceptions."""

class CtcdiscValidationError(CtcdiscError):
    """A state, operator or problem definition violates its invariants."""

class CtcdiscConfigError(CtcdiscError):
    """Malformed or inconsistent experiment configuration."""

class CtcdiscResourceError(CtcdiscError):
    """A size guard refused to start a computation."""

class CtcdiscConvergenceError(CtcdiscError):
    """A numerical iteration did not converge."""

def add_note(exc: BaseException, note: str) -> None:
    """
    Attach a context note to an exception.

    Python < 3.11 has no BaseException.add_note; the note is stored
    in the same __notes__ list the native method uses.
    """
    try:
        exc.add_note(note)
    except AttributeError:
        notes = getattr(exc, '__notes__', None)
        if notes is None:
            notes = []
            setattr(exc, '__notes__', notes)
        notes.append(note)
