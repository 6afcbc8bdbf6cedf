"""Experiment configuration: presets, method definitions, and the INI loader.

Experiment files are INI-style:

    [run]
    workdir = out

    [sequence.<label>]
    path = seqs/a.yuv
    width = 64
    height = 64
    bit_depth = 8
    chroma = 420
    frame_count = 8
    frame_rate = 30
    # optional monochrome depth stream coded at qp_depth:
    # depth_path = seqs/a_depth.yuv
    # depth_bit_depth = 8

    [method.<label>]
    scale = 1/2                 # 1/1 disables resampling
    down_filter = lanczos:3
    up_filter = nn
    qp_texture_offset = -6
    codec = mock                # or: external (needs encode_cmd/decode_cmd)
    # postproc_net = net.json   or  mfrnet:4,4,32,16
    # postproc_weights = 22=w22.rqpw, 27=w27.rqpw, ...

    [qps]
    pairs = 22:4, 27:7, 32:11, 37:15

    [metrics]
    psnr_y = native
    # vmaf = vmaf-tool --ref {ref} --dist {dist} -w {w} -h {h} -b {bitdepth}

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from ..errors import ConfigError
from ..frame_io import C400, C420, VideoSpec
from ..postproc_cnn import NetworkSpec, build_mfrnet_style, load_weights, validate_weights
from ..resample import LANCZOS3, NEAREST, ResampleFilter, parse_scale
from .codecs import ExternalCodec, MockCodec, QP_MAX, QP_MIN

# texture/depth quantization pairs of the common test conditions
DEFAULT_QP_PAIRS = ((22, 4), (27, 7), (32, 11), (37, 15))
# texture shift applied when coding at half resolution
HALF_RES_QP_OFFSET = -6


@dataclass(frozen=True)
class QpPair:
    qp_texture: int
    qp_depth: int

    def __post_init__(self):
        for name, qp in (("texture", self.qp_texture), ("depth", self.qp_depth)):
            if not QP_MIN <= qp <= QP_MAX:
                raise ConfigError(f"{name} qp {qp} outside [{QP_MIN}, {QP_MAX}]")


@dataclass(frozen=True)
class SequencePreset:
    """One row of the standard immersive test-set table."""

    id: str
    name: str
    content: str  # CG (computer generated) | NC (natural content)
    width: int
    height: int
    views: int


CTC_SEQUENCES = {
    "A": SequencePreset("A", "Classroom", "CG", 4096, 2048, 14),
    "B": SequencePreset("B", "Museum", "CG", 2048, 2048, 18),
    "C": SequencePreset("C", "Hijack", "CG", 4096, 2048, 9),
    "D": SequencePreset("D", "Painter", "NC", 2048, 1088, 16),
    "E": SequencePreset("E", "Frog", "NC", 1920, 1080, 13),
    "J": SequencePreset("J", "Kitchen", "CG", 1920, 1080, 24),
    "L": SequencePreset("L", "Fencing", "NC", 1920, 1080, 9),
}


@dataclass
class SequenceConfig:
    label: str
    path: Path
    spec: VideoSpec
    frame_rate: float
    depth_path: Path | None = None
    depth_spec: VideoSpec | None = None


@dataclass
class PostprocConfig:
    net: NetworkSpec
    weights_by_qp: dict[int, Path]
    luma_only: bool = True

    def select_weights_qp(self, base_qp_texture: int) -> int:
        """Nearest configured base QP wins; ties go to the lower QP."""
        return min(
            self.weights_by_qp, key=lambda q: (abs(q - base_qp_texture), q)
        )


@dataclass
class MethodConfig:
    label: str
    codec: object
    scale: Fraction = Fraction(1, 1)
    down_filter: ResampleFilter = LANCZOS3
    up_filter: ResampleFilter | None = None
    depth_down_filter: ResampleFilter | None = None  # None: same kernel as texture
    qp_texture_offset: int = 0
    postproc: PostprocConfig | None = None

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigError(f"method {self.label!r}: scale must be positive")
        if self.scale != 1 and self.up_filter is None:
            self.up_filter = NEAREST
        if self.postproc is not None and self.up_filter is None:
            raise ConfigError(
                f"method {self.label!r}: post-processing requires an upsampling filter"
            )

    @property
    def resamples(self) -> bool:
        return self.scale != 1

    def effective_qp(self, pair: QpPair) -> QpPair:
        qp = pair.qp_texture + self.qp_texture_offset
        if not QP_MIN <= qp <= QP_MAX:
            raise ConfigError(
                f"method {self.label!r}: offset {self.qp_texture_offset} pushes "
                f"texture qp {pair.qp_texture} outside [{QP_MIN}, {QP_MAX}]"
            )
        return QpPair(qp, pair.qp_depth)


@dataclass
class ExperimentConfig:
    sequences: list[SequenceConfig]
    methods: list[MethodConfig]
    qp_pairs: list[QpPair]
    metrics: dict[str, str]  # metric_id -> "native" or command template
    workdir: Path = Path("rqpipe_out")
    psnr_inf_cap: float = 100.0

    def validate(self):
        if not self.sequences:
            raise ConfigError("no sequences configured")
        if not self.methods:
            raise ConfigError("no methods configured")
        if not self.qp_pairs:
            raise ConfigError("no qp pairs configured")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate method labels: {labels}")
        for method in self.methods:
            for pair in self.qp_pairs:
                method.effective_qp(pair)  # raises if the offset leaves the range
            if method.postproc is not None:
                if not method.postproc.weights_by_qp:
                    raise ConfigError(f"method {method.label!r}: empty weight map")
                for qp, path in method.postproc.weights_by_qp.items():
                    if not Path(path).is_file():
                        raise ConfigError(
                            f"method {method.label!r}: weights for qp {qp} missing: {path}"
                        )
                    validate_weights(method.postproc.net, load_weights(path))
        for seq in self.sequences:
            if not Path(seq.path).is_file():
                raise ConfigError(f"sequence {seq.label!r}: file missing: {seq.path}")


def _parse_qp_pairs(text: str) -> list[QpPair]:
    pairs = []
    for chunk in text.replace(";", ",").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            t, d = chunk.split(":")
            pairs.append(QpPair(int(t), int(d)))
        except ValueError as exc:
            raise ConfigError(f"bad qp pair {chunk!r}, want texture:depth") from exc
    return pairs


def _parse_weight_map(text: str, base: Path) -> dict[int, Path]:
    out = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            qp, path = chunk.split("=", 1)
            out[int(qp.strip())] = base / path.strip()
        except ValueError as exc:
            raise ConfigError(f"bad weight entry {chunk!r}, want qp=path") from exc
    return out


def _parse_net(value: str, base: Path) -> NetworkSpec:
    value = value.strip()
    if value.startswith("mfrnet:"):
        try:
            nums = [int(v) for v in value.split(":", 1)[1].split(",")]
            return build_mfrnet_style(*nums)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad builder spec {value!r}") from exc
    if value == "mfrnet":
        return build_mfrnet_style()
    return NetworkSpec.from_json((base / value).read_text())


def _sequence_from_section(label: str, section, base: Path) -> SequenceConfig:
    try:
        spec = VideoSpec(
            width=section.getint("width"),
            height=section.getint("height"),
            bit_depth=section.getint("bit_depth", 8),
            chroma=section.get("chroma", C420).strip(),
            frame_count=section.getint("frame_count"),
            label=label,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sequence {label!r}: bad or missing spec fields") from exc
    if "frame_rate" not in section:
        raise ConfigError(f"sequence {label!r}: frame_rate must be stated explicitly")
    seq = SequenceConfig(
        label=label,
        path=base / section.get("path"),
        spec=spec,
        frame_rate=section.getfloat("frame_rate"),
    )
    if section.get("depth_path"):
        seq.depth_path = base / section.get("depth_path")
        seq.depth_spec = VideoSpec(
            width=spec.width,
            height=spec.height,
            bit_depth=section.getint("depth_bit_depth", spec.bit_depth),
            chroma=C400,
            frame_count=spec.frame_count,
            label=f"{label}_depth",
        )
    return seq


def _method_from_section(label: str, section, base: Path) -> MethodConfig:
    codec_kind = section.get("codec", "mock").strip().lower()
    if codec_kind == "mock":
        codec = MockCodec()
    elif codec_kind == "external":
        codec = ExternalCodec(
            encode_cmd=section.get("encode_cmd", ""),
            decode_cmd=section.get("decode_cmd", ""),
            bitstream_ext=section.get("bitstream_ext", ".bin"),
        )
    else:
        raise ConfigError(f"method {label!r}: unknown codec {codec_kind!r}")

    postproc = None
    if section.get("postproc_net"):
        if not section.get("postproc_weights"):
            raise ConfigError(f"method {label!r}: postproc_net without postproc_weights")
        postproc = PostprocConfig(
            net=_parse_net(section.get("postproc_net"), base),
            weights_by_qp=_parse_weight_map(section.get("postproc_weights"), base),
            luma_only=section.getboolean("postproc_luma_only", True),
        )

    depth_filter = section.get("depth_down_filter")
    return MethodConfig(
        label=label,
        codec=codec,
        scale=parse_scale(section.get("scale", "1/1")),
        down_filter=ResampleFilter.parse(section.get("down_filter", "lanczos:3")),
        up_filter=ResampleFilter.parse(section.get("up_filter")) if section.get("up_filter") else None,
        depth_down_filter=ResampleFilter.parse(depth_filter) if depth_filter else None,
        qp_texture_offset=section.getint("qp_texture_offset", 0),
        postproc=postproc,
    )


def load_experiment(path) -> ExperimentConfig:
    """Parse and validate an experiment INI file."""
    path = Path(path)
    # no interpolation: metric/codec command templates may contain % or {}
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path):
        raise ConfigError(f"cannot read experiment config {path}")
    base = path.parent

    sequences = []
    methods = []
    for name in parser.sections():
        if name.startswith("sequence."):
            sequences.append(_sequence_from_section(name[len("sequence."):], parser[name], base))
        elif name.startswith("method."):
            methods.append(_method_from_section(name[len("method."):], parser[name], base))

    if parser.has_section("qps") and parser["qps"].get("pairs"):
        qp_pairs = _parse_qp_pairs(parser["qps"]["pairs"])
    else:
        qp_pairs = [QpPair(t, d) for t, d in DEFAULT_QP_PAIRS]

    metrics = {"psnr_y": "native"}
    if parser.has_section("metrics"):
        metrics = {k: v.strip() for k, v in parser["metrics"].items()}
        if not metrics:
            metrics = {"psnr_y": "native"}

    workdir = Path(parser.get("run", "workdir", fallback="rqpipe_out"))
    if not workdir.is_absolute():
        workdir = base / workdir
    cfg = ExperimentConfig(
        sequences=sequences,
        methods=methods,
        qp_pairs=qp_pairs,
        metrics=metrics,
        workdir=workdir,
        psnr_inf_cap=parser.getfloat("run", "psnr_inf_cap", fallback=100.0),
    )
    cfg.validate()
    return cfg


def config_as_dict(cfg: ExperimentConfig) -> dict:
    """JSON-serializable echo of the effective configuration."""
    return {
        "workdir": str(cfg.workdir),
        "psnr_inf_cap": cfg.psnr_inf_cap,
        "qp_pairs": [[p.qp_texture, p.qp_depth] for p in cfg.qp_pairs],
        "metrics": dict(cfg.metrics),
        "sequences": [
            {
                "label": s.label,
                "path": str(s.path),
                "width": s.spec.width,
                "height": s.spec.height,
                "bit_depth": s.spec.bit_depth,
                "chroma": s.spec.chroma,
                "frame_count": s.spec.frame_count,
                "frame_rate": s.frame_rate,
                "depth_path": str(s.depth_path) if s.depth_path else None,
                "depth_bit_depth": s.depth_spec.bit_depth if s.depth_spec else None,
            }
            for s in cfg.sequences
        ],
        "methods": [
            {
                "label": m.label,
                "scale": str(m.scale),
                "down_filter": str(m.down_filter),
                "up_filter": str(m.up_filter) if m.up_filter else None,
                "depth_down_filter": str(m.depth_down_filter) if m.depth_down_filter else None,
                "qp_texture_offset": m.qp_texture_offset,
                "codec": m.codec.describe(),
                "postproc": (
                    {
                        "weights_by_qp": {str(q): str(p) for q, p in m.postproc.weights_by_qp.items()},
                        "luma_only": m.postproc.luma_only,
                        "net_meta": m.postproc.net.meta,
                    }
                    if m.postproc
                    else None
                ),
            }
            for m in cfg.methods
        ],
        "conventions": {
            "resample_phase": "center_aligned",
            "resample_boundary": "clamp_to_edge_renormalized",
            "bitrate": "coded_bits * frame_rate / frame_count, depth stream summed in",
            "psnr_aggregation": "mean_of_per_frame",
            "postproc_model_selection": "nearest_base_texture_qp",
        },
    }
