from hypothesis import HealthCheck, settings

# property tests wrap numerical routines whose first call may trigger
# compilation; wall-clock deadlines would make those runs flaky
settings.register_profile(
    "numeric",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")
