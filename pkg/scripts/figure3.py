"""Duration vs failures on the 8-user layout for m in {5, 7, 10} with two retransmission slots."""

from _common import config, parser

from mmcast.sweep import run_figure


def main():
    args = parser(__doc__).parse_args()
    print(run_figure(3, config(args), args.out_dir, workers=args.workers))


if __name__ == "__main__":
    main()
