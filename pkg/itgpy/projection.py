import logging
import pandas as pd

from typing import Union

from itgpy.model import SystemModel, ViewKind, ViewRelation, system_itgr

logger = logging.getLogger(__name__)

_ITGR_FRAME_COLUMNS = [
    "region", "source", "caller", "channel", "params", "callee", "target"
]


def itgr_frame(model: SystemModel) -> pd.DataFrame:
    """The composed system transition relation as a DataFrame.

    One row per transition, regions in declaration order, with a leading
    `region` column. The `params` column holds tuples of `Parameter`.

    Examples
    --------
    >>> from itgpy import projection
    >>> from itgpy.example_models import vending_machine
    >>> frame = projection.itgr_frame(vending_machine.load_model())
    >>> frame.groupby("region", sort=False).size().tolist()
    [4, 6, 9, 1, 1]
    """
    itgr = system_itgr(model)
    records = [
        (region,) + row for region, row in zip(itgr.provenance, itgr.rows)
    ]
    return pd.DataFrame.from_records(records, columns=_ITGR_FRAME_COLUMNS)


def _to_view(
    frame: pd.DataFrame, kind: ViewKind, provenance: pd.Series
) -> ViewRelation:
    columns = list(ViewRelation(kind).columns)
    rows = tuple(
        tuple(row)
        for row in frame[columns].itertuples(index=False, name=None)
    )
    return ViewRelation(kind, rows, tuple(provenance.tolist()))


def project_ibd(model: SystemModel) -> ViewRelation:
    """Project the internal block diagram relation.

    Selects (caller, channel, params, callee) from every region's
    transitions and keeps the first occurrence of each distinct row,
    scanning regions and rows in declaration order.

    Parameters
    ----------
    model : SystemModel
        A valid model.

    Returns
    -------
    ViewRelation
        An IBDR view. Provenance is the region of each row's first
        occurrence.

    Examples
    --------
    >>> from itgpy import projection
    >>> from itgpy.example_models import vending_machine
    >>> len(projection.project_ibd(vending_machine.load_model()))
    16
    """
    frame = itgr_frame(model)
    distinct = frame.drop_duplicates(
        subset=["caller", "channel", "params", "callee"], keep="first"
    )
    logger.debug(
        "IBDR: %d of %d rows distinct", len(distinct), len(frame)
    )
    return _to_view(distinct, ViewKind.IBDR, distinct["region"])


def project_smd(model: SystemModel) -> ViewRelation:
    """Project the state machine diagram relation.

    Selects (source, channel, target) per region. Exact duplicates within
    a region collapse; rows of different regions never merge.

    Examples
    --------
    >>> from itgpy import projection
    >>> from itgpy.example_models import vending_machine
    >>> smdr = projection.project_smd(vending_machine.load_model())
    >>> [len(rows) for rows in smdr.region_groups().values()]
    [4, 6, 9, 1, 1]
    """
    frame = itgr_frame(model)
    distinct = frame.drop_duplicates(
        subset=["region", "source", "channel", "target"], keep="first"
    )
    logger.debug("SMDR: %d rows", len(distinct))
    return _to_view(distinct, ViewKind.SMDR, distinct["region"])


def project_ad(model: SystemModel) -> ViewRelation:
    """Project the activity diagram relation.

    Selects (source, channel, params, callee, target) per region. Exact
    duplicates within a region collapse; the caller column is projected
    away, so rows differing only in caller become one.
    """
    frame = itgr_frame(model)
    distinct = frame.drop_duplicates(
        subset=["region", "source", "channel", "params", "callee", "target"],
        keep="first",
    )
    logger.debug("ADR: %d rows", len(distinct))
    return _to_view(distinct, ViewKind.ADR, distinct["region"])


def project(
    model: SystemModel, view: Union[str, ViewKind]
) -> ViewRelation:
    """Dispatch to a projection by view name.

    Parameters
    ----------
    view : Union[str, ViewKind]
        One of `"ibd"`, `"smd"`, `"ad"`, `"itgr"` (case-insensitive) or a
        `ViewKind`.
    """
    projections = {
        ViewKind.ITGR: system_itgr,
        ViewKind.IBDR: project_ibd,
        ViewKind.SMDR: project_smd,
        ViewKind.ADR: project_ad,
    }
    if isinstance(view, str) and not isinstance(view, ViewKind):
        names = {
            "itgr": ViewKind.ITGR,
            "ibd": ViewKind.IBDR,
            "smd": ViewKind.SMDR,
            "ad": ViewKind.ADR,
        }
        key = view.lower()
        if key not in names:
            raise ValueError(
                f"Unknown view '{view}'. Expected one of: "
                f"{', '.join(names)}."
            )
        view = names[key]
    return projections[ViewKind(view)](model)
