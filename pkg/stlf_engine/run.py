import uvicorn

from .settings import PORT


def main() -> None:
    uvicorn.run("stlf_engine.app:create_app", factory=True, host="0.0.0.0", port=PORT, proxy_headers=True)


if __name__ == "__main__":
    main()
