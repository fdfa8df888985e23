import argparse
import sys

from .protocol import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modelhost",
        description="model host speaking the bridge line protocol on "
                    "stdin/stdout")
    parser.add_argument("--kind", choices=["tabpfn", "gbt"], default="gbt",
                        help="model backend when the hello hparams do not "
                             "name one")
    args = parser.parse_args(argv)
    return serve(default_kind=args.kind)


if __name__ == "__main__":
    sys.exit(main())
