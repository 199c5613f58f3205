"""Duration vs failures on the 8-user layout for 0, 1 and 2 retransmission slots (m=5)."""

from _common import config, parser

from mmcast.sweep import run_figure


def main():
    args = parser(__doc__).parse_args()
    print(run_figure(2, config(args), args.out_dir, workers=args.workers))


if __name__ == "__main__":
    main()
