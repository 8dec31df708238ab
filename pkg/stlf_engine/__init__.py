# Package marker; `python -m stlf_engine` runs the CLI, `python -m stlf_engine.run` the service.
