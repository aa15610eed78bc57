import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd
from sklearn.preprocessing import LabelEncoder

from .._scheme import EmptyDatasetError, InteractionParseError, DatasetError
from .._seeding import make_rng


@dataclass(frozen=True)
class Interaction:
    user_id: int
    item_id: int
    timestamp: int = 0


class _LineReader(ABC):
    """Parses one interaction file into a raw frame (user, item, timestamp, seq)."""

    def __init__(self, path):
        self.path = Path(path)

    @abstractmethod
    def _parse(self, line: str, line_no: int):
        """one (user, item, timestamp) triple per line; raise InteractionParseError on a bad line"""
        pass

    def read(self) -> pd.DataFrame:
        if not self.path.exists():
            raise DatasetError(f"no such file: {self.path}")
        rows = []
        with open(self.path, encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue
                user, item, ts = self._parse(line, line_no)
                rows.append((user, item, ts, line_no))
        if not rows:
            raise EmptyDatasetError(f"{self.path} holds no interactions")
        return pd.DataFrame(rows, columns=["user", "item", "timestamp", "seq"])

    @staticmethod
    def _timestamp(token: str, line: str, line_no: int):
        try:
            return int(token)
        except ValueError:
            raise InteractionParseError(line_no, line, "timestamp is not an integer")


class Ml1mReader(_LineReader):
    """`user::item::rating::timestamp`, rating discarded."""

    def _parse(self, line, line_no):
        parts = line.split("::")
        if len(parts) != 4 or not parts[0] or not parts[1]:
            raise InteractionParseError(line_no, line, "expected user::item::rating::timestamp")
        return parts[0].strip(), parts[1].strip(), self._timestamp(parts[3].strip(), line, line_no)


class TsvReader(_LineReader):
    """`user<TAB>item<TAB>timestamp`, timestamp column optional."""

    def _parse(self, line, line_no):
        parts = line.split("\t")
        if len(parts) not in (2, 3) or not parts[0].strip() or not parts[1].strip():
            raise InteractionParseError(line_no, line, "expected user<TAB>item[<TAB>timestamp]")
        ts = self._timestamp(parts[2].strip(), line, line_no) if len(parts) == 3 else None
        return parts[0].strip(), parts[1].strip(), ts


READERS = {"ml1m": Ml1mReader, "tsv": TsvReader}


def _encoder(values: pd.Series):
    # numeric ids sort numerically, anything else lexically
    if values.str.fullmatch(r"-?\d+").all():
        values = values.astype(np.int64)
    return LabelEncoder().fit(values), values


@dataclass
class InteractionTable:
    """Deduplicated interactions over dense ids plus the remap tables that produced them."""
    frame: pd.DataFrame        # user_id, item_id, timestamp, seq
    user_map: pd.DataFrame     # original, dense
    item_map: pd.DataFrame
    has_timestamps: bool

    @property
    def num_users(self) -> int:
        return len(self.user_map)

    @property
    def num_items(self) -> int:
        return len(self.item_map)

    def __len__(self):
        return len(self.frame)

    def interactions(self) -> List[Interaction]:
        return [Interaction(int(u), int(i), int(t)) for u, i, t in
                self.frame[["user_id", "item_id", "timestamp"]].itertuples(index=False)]

    def chrono(self) -> np.ndarray:
        """Ordering key for the chronological cut: timestamps, or file order when the file has none."""
        column = "timestamp" if self.has_timestamps else "seq"
        return self.frame[column].to_numpy(dtype=np.int64)

    def graph(self):
        from .graph import build_graph
        return build_graph(self.interactions(), num_users=self.num_users, num_items=self.num_items,
                           chrono=self.chrono())

    @classmethod
    def from_folder(cls, folder, has_timestamps: bool) -> "InteractionTable":
        folder = Path(folder)
        frame = pd.read_csv(folder / "interactions.tsv", sep="\t")
        user_map = pd.read_csv(folder / "user_map.tsv", sep="\t", dtype={"original": str})
        item_map = pd.read_csv(folder / "item_map.tsv", sep="\t", dtype={"original": str})
        return cls(frame, user_map, item_map, has_timestamps)


def _densify(raw: pd.DataFrame, has_timestamps: bool) -> InteractionTable:
    user_encoder, users = _encoder(raw["user"].astype(str))
    item_encoder, items = _encoder(raw["item"].astype(str))
    frame = pd.DataFrame({
        "user_id": user_encoder.transform(users).astype(np.int64),
        "item_id": item_encoder.transform(items).astype(np.int64),
        "timestamp": raw["timestamp"].to_numpy(dtype=np.int64),
        "seq": raw["seq"].to_numpy(dtype=np.int64),
    })
    # duplicates collapse onto the latest timestamp, file order breaking ties
    frame = (frame.sort_values(["timestamp", "seq"], kind="mergesort")
                  .drop_duplicates(["user_id", "item_id"], keep="last")
                  .sort_values(["user_id", "item_id"], kind="mergesort")
                  .reset_index(drop=True))
    user_map = pd.DataFrame({"original": user_encoder.classes_.astype(str),
                             "dense": np.arange(len(user_encoder.classes_), dtype=np.int64)})
    item_map = pd.DataFrame({"original": item_encoder.classes_.astype(str),
                             "dense": np.arange(len(item_encoder.classes_), dtype=np.int64)})
    return InteractionTable(frame, user_map, item_map, has_timestamps)


def load_interactions(path, format: str = "tsv") -> InteractionTable:
    """
    read an interaction file and remap ids to dense 0-based indexes
    - format: 'ml1m' (user::item::rating::timestamp) or 'tsv' (user<TAB>item[<TAB>timestamp])

    usage:
        - load_interactions('ratings.dat', 'ml1m')
        - load_interactions('toy_blocks.tsv')
    """
    if format not in READERS:
        raise DatasetError(f"unknown format {format!r}, expected one of {sorted(READERS)}")
    raw = READERS[format](path).read()
    has_timestamps = bool(raw["timestamp"].notna().all())
    if not has_timestamps:
        raw["timestamp"] = 0
    table = _densify(raw, has_timestamps)
    logging.info(f"loaded {len(table)} interactions, {table.num_users} users, {table.num_items} items from {path}")
    return table


def subsample_interactions(table: InteractionTable, frac: float, seed: int) -> InteractionTable:
    """Keep a seeded fraction of users (all their interactions), then re-densify."""
    if frac >= 1.0:
        return table
    rng = make_rng(seed, "subsample")
    n_keep = max(1, int(np.floor(frac * table.num_users)))
    keep = np.sort(rng.choice(table.num_users, size=n_keep, replace=False))
    kept = table.frame[table.frame["user_id"].isin(keep)]
    raw = pd.DataFrame({
        "user": table.user_map["original"].to_numpy()[kept["user_id"].to_numpy()],
        "item": table.item_map["original"].to_numpy()[kept["item_id"].to_numpy()],
        "timestamp": kept["timestamp"].to_numpy(),
        "seq": kept["seq"].to_numpy(),
    })
    sub = _densify(raw, table.has_timestamps)
    logging.info(f"subsampled {sub.num_users}/{table.num_users} users ({len(sub)} interactions)")
    return sub
