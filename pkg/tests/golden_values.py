"""Pinned outputs of the finalized reference grid (regenerate only on a
deliberate model change; every value here was produced by the solver and
hand-checked for plausibility)."""

# Base case: all taps neutral, nominal loads, generators at their initial
# setpoints.  Solved at tol=1e-8 from a flat start.
POC_BASE_V_PU = [
    1.02,
    1.0164852934990967,
    1.015596835898236,
    1.0153327338739517,
    1.0152007632181415,
    1.0155968358982372,
    1.0153327338739535,
    1.0152007632181435,
    1.001444034144912,
    1.0011757847314375,
    1.001041740690306,
    1.0014440341449133,
    1.0011757847314393,
    1.001041740690308,
]

POC_BASE_ITERATIONS = 4
