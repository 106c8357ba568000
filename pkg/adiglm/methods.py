import enum
import logging
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Sequence

import numpy as np

from .errors import CatalogValidationError, UnknownMethod
from .tableau import (
    PRECONSISTENCY_TOL,
    AdiMethod,
    AssembledTableau,
    PartitionLayout,
    base_tableau,
    check_order_conditions,
    preconsistency_residual,
)


class MethodId(enum.Enum):
    ADI_DIMSIM2 = "adi-dimsim2"
    ADI_DIMSIM3 = "adi-dimsim3"
    ADI_DIMSIM4 = "adi-dimsim4"
    REMARK_DIMSIM2 = "remark-dimsim2"

    @staticmethod
    def fetch_values():
        return [c.value for c in MethodId]

    @classmethod
    def from_order(cls, order: int) -> "MethodId":
        try:
            return {2: cls.ADI_DIMSIM2, 3: cls.ADI_DIMSIM3, 4: cls.ADI_DIMSIM4}[order]
        except KeyError:
            raise UnknownMethod(f"order {order}") from None


# Order-condition tolerance per method. The order 3 and 4 coefficients are
# rational approximations, order 4 with larger B entries.
ORDER_CONDITION_TOL = {
    MethodId.ADI_DIMSIM2: 1e-12,
    MethodId.ADI_DIMSIM3: 1e-12,
    MethodId.ADI_DIMSIM4: 1e-10,
}

_DIMSIM3 = {
    "gamma": "129981159316/298213221025",
    "c": ["0", "1/2", "1"],
    "v": [
        "1611220452657/2918396719813",
        "626900045900/853091602939",
        "-165394139815/576391394057",
    ],
    "A_I": [
        ["gamma", "0", "0"],
        ["472981046840/1888035733227", "gamma", "0"],
        ["-408860438935/337456558734", "1049716501919/1048380236594", "gamma"],
    ],
    "B_I": [
        [
            "818629988268/981817092145",
            "735879558291/1139134361459",
            "-96693387431/306159262034",
        ],
        [
            "435713380671/718693545019",
            "3397277300866/2639826970205",
            "-581689679739/1212506039656",
        ],
        [
            "-164008995335/531777165056",
            "3204278525979/842472621931",
            "-1170634530631/1044535547981",
        ],
    ],
    "A_E": [
        ["0", "0", "0"],
        ["692830401049/1119419041371", "0", "0"],
        ["-974910195245/1036334372568", "1458124485343/1218848111125", "0"],
    ],
    "B_E": [
        [
            "274198327012/348784765929",
            "335124252337/1242427076379",
            "256046237035/1044616400532",
        ],
        [
            "2367946890051/2381074405894",
            "-395462379375/996294720374",
            "391448928279/669688356392",
        ],
        [
            "1211513153203/1601457627995",
            "473388990672/901108379101",
            "1335987676745/1749669440649",
        ],
    ],
}

_DIMSIM4 = {
    "gamma": "2/5",
    "c": ["0", "1/3", "2/3", "1"],
    "v": ["3/40", "-77/277", "-41/107", "1880483/1185560"],
    "A_I": [
        ["gamma", "0", "0", "0"],
        ["1/155", "gamma", "0", "0"],
        ["-3/127", "31/72", "gamma", "0"],
        ["6/139", "12/19", "29/95", "gamma"],
    ],
    "B_I": [
        [
            "25640275033859/233564187988800",
            "405169687/540615360",
            "1089772729/8109230400",
            "70445177/426801600",
        ],
        [
            "89870426730779/233564187988800",
            "-545995987/1621846080",
            "13906861889/8109230400",
            "-1223893451/4410283200",
        ],
        [
            "292292722987739/233564187988800",
            "-5722388059/1621846080",
            "5251926081/901025600",
            "-115646334041/54203803200",
        ],
        [
            "12591629268162881/4437719571787200",
            "-4936252337/540615360",
            "102615203329/8109230400",
            "-5841129112303/1127183025600",
        ],
    ],
    "A_E": [
        ["0", "0", "0", "0"],
        ["768/7129", "0", "0", "0"],
        ["2699/8714", "4969/11444", "0", "0"],
        ["2629/3049", "2643/20780", "11707/22938", "0"],
    ],
    "B_E": [
        [
            "9887514441977875393/8084061960608111040",
            "75125403707867/1268701473326400",
            "200041286909/326332503360",
            "-5924747/85360320",
        ],
        [
            "8877006696901861513/8084061960608111040",
            "727096994167267/1268701473326400",
            "-67370070011/326332503360",
            "119019300359/202844573760",
        ],
        [
            "17771936994130966829533/23128501269299805685440",
            "249067742877763/140966830369600",
            "-519937182674317/311212430704320",
            "940676971064501/1064048569640640",
        ],
        [
            "8566493244911672759404729/32110678261545596037650880",
            "17071987325364576461/4850245732526827200",
            "-257098496412689/67811894198208",
            "275159340062707361/206758465410336192",
        ],
    ],
}

_REMARK = {
    "c": ["0", "1", "0", "1"],
    "A": [
        ["5/8", "0", "0", "0"],
        ["1/4", "5/8", "1/2", "0"],
        ["5/8", "0", "5/8", "0"],
        ["1/4", "5/8", "1/4", "5/8"],
    ],
    "B": [
        ["1/2", "-5/32", "-3/128", "5/128"],
        ["0", "27/32", "13/128", "85/128"],
        ["-3/128", "5/128", "-3/128", "5/128"],
        ["13/128", "85/128", "13/128", "85/128"],
    ],
    "V": [
        ["-5/16", "21/16", "0", "0"],
        ["-5/16", "21/16", "0", "0"],
        ["0", "0", "-5/16", "21/16"],
        ["0", "0", "-5/16", "21/16"],
    ],
}


def _exact(values: Sequence, gamma: Fraction = None) -> np.ndarray:
    """Object array of Fractions; the token 'gamma' stands for the diagonal."""

    def parse(token: str) -> Fraction:
        return gamma if token == "gamma" else Fraction(token)

    array = np.asarray(values, dtype=object)
    return np.vectorize(parse, otypes=[object])(array)


def _to_float(values: np.ndarray) -> np.ndarray:
    return np.vectorize(float, otypes=[float])(values)


def _rational_method(name: str, order: int, data: Dict) -> AdiMethod:
    gamma = Fraction(data["gamma"])
    c = _to_float(_exact(data["c"]))
    v = _to_float(_exact(data["v"]))
    implicit = base_tableau(
        _to_float(_exact(data["A_I"], gamma)), _to_float(_exact(data["B_I"])), v, c, order
    )
    explicit = base_tableau(
        _to_float(_exact(data["A_E"])), _to_float(_exact(data["B_E"])), v, c, order
    )
    return AdiMethod(
        implicit=implicit, explicit=explicit, gamma=float(gamma), name=name, order=order
    )


def _adi_dimsim2() -> AdiMethod:
    r2 = np.sqrt(2.0)
    gamma = (2.0 - r2) / 2.0
    c = np.array([0.0, 1.0])
    v = np.array([(3.0 - r2) / 2.0, (r2 - 1.0) / 2.0])
    implicit = base_tableau(
        A=np.array([[gamma, 0.0], [2.0 * (r2 + 3.0) / 7.0, gamma]]),
        B=np.array(
            [
                [(73.0 - 34.0 * r2) / 28.0, (4.0 * r2 - 5.0) / 4.0],
                [3.0 * (29.0 - 16.0 * r2) / 28.0, (34.0 * r2 - 45.0) / 28.0],
            ]
        ),
        v=v,
        c=c,
        order=2,
    )
    explicit = base_tableau(
        A=np.array([[0.0, 0.0], [1.5, 0.0]]),
        B=np.array(
            [
                [1.0 / r2, (3.0 - r2) / 4.0],
                [(r2 - 1.0) / 2.0, (3.0 - r2) / 4.0],
            ]
        ),
        v=v,
        c=c,
        order=2,
    )
    return AdiMethod(
        implicit=implicit, explicit=explicit, gamma=gamma, name="ADI-DIMSIM2", order=2
    )


_BUILDERS = {
    MethodId.ADI_DIMSIM2: _adi_dimsim2,
    MethodId.ADI_DIMSIM3: lambda: _rational_method("ADI-DIMSIM3", 3, _DIMSIM3),
    MethodId.ADI_DIMSIM4: lambda: _rational_method("ADI-DIMSIM4", 4, _DIMSIM4),
}


def _certify(method_id: MethodId, method: AdiMethod) -> None:
    tol = ORDER_CONDITION_TOL[method_id]
    worst = 0.0
    for base in (method.implicit, method.explicit):
        report = check_order_conditions(base)
        if not report.satisfied(tol):
            raise CatalogValidationError(method.name, report.max_residual)
        worst = max(worst, report.max_residual)
        residual = max(preconsistency_residual(base))
        if residual > PRECONSISTENCY_TOL:
            raise CatalogValidationError(method.name, residual)
    logging.info(f"Loaded {method.name}: max order-condition residual {worst:.3e}")


def get_method(method_id: MethodId) -> AdiMethod:
    """Build and validate one of the cataloged ADI-DIMSIM methods.

    Parameters
    ----------
    method_id : MethodId
        catalog entry, anything but the remark tableau

    Returns
    -------
    AdiMethod

    Raises
    ------
    UnknownMethod
        for ids without an implicit/explicit pair
    """
    return _build(MethodId(method_id))


@lru_cache(maxsize=None)
def _build(method_id: MethodId) -> AdiMethod:
    if method_id not in _BUILDERS:
        raise UnknownMethod(method_id.value)
    method = _BUILDERS[method_id]()
    _certify(method_id, method)
    return method


def get_method_by_order(order: int) -> AdiMethod:
    return get_method(MethodId.from_order(order))


def get_remark_tableau() -> AssembledTableau:
    """Second order two-way assembled tableau with exact rational entries."""
    A = _exact(_REMARK["A"])
    B = _exact(_REMARK["B"])
    V = _exact(_REMARK["V"])
    U = _exact(np.eye(4, dtype=int).astype(str).tolist())
    return AssembledTableau(
        bigA=A,
        bigU=U,
        bigB=B,
        bigV=V,
        c_full=_exact(_REMARK["c"]),
        layout=PartitionLayout(n_partitions=2, n_stiff=2),
        s=2,
        r=2,
    )


def catalog() -> List[AdiMethod]:
    return [get_method(method_id) for method_id in _BUILDERS]
