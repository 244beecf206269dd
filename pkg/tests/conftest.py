def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full-depth verification runs (slow)"
    )
