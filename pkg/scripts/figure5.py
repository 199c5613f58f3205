"""Two-user sweep: user 2 over 6 radii x 8 angles, unicast vs hierarchical."""

from _common import config, parser

from mmcast.sweep import run_figure


def main():
    args = parser(__doc__).parse_args()
    print(run_figure(5, config(args), args.out_dir, workers=args.workers))


if __name__ == "__main__":
    main()
