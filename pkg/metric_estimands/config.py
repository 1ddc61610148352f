from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Output
    output_dir: str = "output"
    csv_float_format: str = "%.15g"

    # Simulation
    default_seed: int = 20240917
    desk_replications: int = 2000
    full_replications: int = 10000
    workers: int = 1

    # Quadrature
    quad_epsabs: float = 1e-9
    quad_epsrel: float = 1e-7
    quad_limit: int = 200

    # Logging
    log_level: str = "INFO"

    project_name: str = "Metric Estimands Toolkit"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="ESTIMANDS_", extra="ignore")


settings = Settings()
