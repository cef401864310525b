# main.py
"""
命令行入口：

    python main.py stability --config runs/stability.json
    python main.py decay-fit --single-step --control
    python main.py serve

退出码：0 = PASS / 完成，2 = INCONCLUSIVE，1 = 错误或检查 FAIL
"""
import argparse
import logging
import sys

import uvicorn

from config.experiment_config import load_config, parse_config
from config.settings import HOST, PORT, RELOAD, WORKERS
from core.errors import ConfigError, WalkError

logger = logging.getLogger("walk")

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2


def _complex(text: str) -> complex:
    try:
        re_part, im_part = (float(v) for v in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"需要 re,im 形式，收到 {text!r}") from e
    return complex(re_part, im_part)


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的数值，收到 {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walk", description="一维非线性离散时间量子行走实验")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 实验配置")
    common.add_argument("--out-dir", help="覆盖配置中的输出目录")
    common.add_argument("--seed", type=int, help="覆盖随机种子")
    common.add_argument("--threads", type=int, default=None, help="扫描与网格求值的并发数")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common], help="演化初值并记录范数")
    sub.add_parser("spectrum", parents=[common], help="线性行走的谱与离散本征函数")

    boundstate = sub.add_parser("boundstate", parents=[common], help="非线性束缚态族")
    boundstate.add_argument("--z", type=_complex, help="在 z = re,im 处求值")
    boundstate.add_argument("--sweep", action="store_true", help="|z| 标度扫描")

    sub.add_parser("modulate", parents=[common], help="调制坐标轨迹")
    sub.add_parser("stability", parents=[common], help="孤子分解稳定性实验")
    sub.add_parser("orbital", parents=[common], help="轨道稳定性 δ 扫描")
    sub.add_parser("z-scaling", parents=[common], help="‖Z‖_l¹ 随 ε 的标度")

    decay = sub.add_parser("decay-fit", parents=[common], help="线性色散衰减指数")
    decay.add_argument("--single-step", action="store_true", help="使用单步时钟 U")
    decay.add_argument("--control", action="store_true", help="本征函数负对照")

    kato = sub.add_parser("kato-check", parents=[common], help="预解式恒等式与 Kato 充分条件")
    kato.add_argument("--eps-list", type=_float_list, help="ε 序列，如 0.1,0.03,0.01")
    kato.add_argument("--s", type=float, help="权重 ⟨x⟩^{−s} 的指数")
    kato.add_argument("--grid-size", type=int, help="λ 网格点数")
    kato.add_argument("--instances", type=int, default=20, help="随机酉矩阵实例数")

    sub.add_parser("serve", help="启动 HTTP 服务")
    return parser


def _load(args):
    cfg = load_config(args.config) if args.config else parse_config({})
    updates = {}
    if args.out_dir:
        updates["out_dir"] = args.out_dir
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "single_step", False):
        updates["single_step"] = True
    if getattr(args, "eps_list", None):
        updates["kato_eps"] = args.eps_list
    if getattr(args, "s", None) is not None:
        updates["kato_s"] = args.s
    if getattr(args, "grid_size", None):
        updates["kato_grid_size"] = args.grid_size
    if updates:
        cfg = parse_config({**cfg.model_dump(), **updates})
    return cfg


def run_command(args) -> int:
    from core import experiments

    cfg = _load(args)
    command = args.command
    if command == "evolve":
        experiments.run_evolve(cfg)
    elif command == "spectrum":
        experiments.run_spectrum(cfg)
    elif command == "boundstate":
        experiments.run_boundstate(cfg, z=args.z, sweep=args.sweep or args.z is None)
    elif command == "modulate":
        result = experiments.run_modulate(cfg)
        if not result["trace"].completed:
            logger.error(f"❌ 调制轨迹在 t={result['trace'].failed_at} 截断: {result['trace'].failure}")
            return EXIT_FAIL
    elif command == "stability":
        report = experiments.run_stability(cfg)
        return EXIT_PASS if report.status == "PASS" else EXIT_INCONCLUSIVE
    elif command == "orbital":
        result = experiments.run_orbital(cfg, workers=args.threads)
        if result["failures"]:
            return EXIT_FAIL
    elif command == "z-scaling":
        experiments.run_z_scaling(cfg, workers=args.threads)
    elif command == "decay-fit":
        report = experiments.run_decay_fit(cfg, control=args.control)["report"]
        return EXIT_PASS if report.passed else EXIT_FAIL
    elif command == "kato-check":
        result = experiments.run_kato_check(cfg, instances=args.instances, workers=args.threads or 1)
        return EXIT_PASS if result["all_pass"] else EXIT_FAIL
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        uvicorn.run("api.app:app", host=HOST, port=PORT, reload=RELOAD, workers=WORKERS)
        return EXIT_PASS

    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return run_command(args)
    except ConfigError as e:
        logger.error(f"❌ 配置错误: {e}")
        return EXIT_FAIL
    except WalkError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
