class DegenerateGradientError(ValueError):
    """Gradient of the implicit path function vanishes (path center)."""


class DegenerateFieldError(ValueError):
    """Guiding vector field has (near) zero norm, heading is undefined."""


class InsideVirtualZoneError(ValueError):
    """Relative distance is not larger than the virtual radius."""


class SingularityError(ArithmeticError):
    """Closed-form safety correction would divide by a vanishing Lg_h_i."""


class ScenarioError(ValueError):
    """Scenario failed to parse or validate.

    ``problems`` holds one ``(location, message)`` tuple per offending field.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("", problems)]
        self.problems = list(problems)
        lines = [f"{loc}: {msg}" if loc else msg for loc, msg in self.problems]
        super().__init__("; ".join(lines))
