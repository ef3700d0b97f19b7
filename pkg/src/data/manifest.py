"""
Mixture manifests: the declarative record of a synthesised corpus.

Text format, one record per line:

    # mixture-manifest v1
    # sample_rate: 16000
    # class 0: white
    # class 1: pink
    clean_path<TAB>noise_path<TAB>class_id<TAB>snr_db<TAB>seed<TAB>offset<TAB>split
    clean/utt_0000.wav<TAB>noise/white/n_0000.wav<TAB>0<TAB>7.25...<TAB>123<TAB>0<TAB>train
    ...

Paths are relative to the manifest's directory. `offset` is the noise
excerpt start the row's seed selects; it is derived, and kept for the split
disjointness check.
"""
import io
import logging
import os
from dataclasses import dataclass, field

import pandas as pd

from ..utils.exceptions import DataLoadingError

logger = logging.getLogger(__name__)

MAGIC_LINE = '# mixture-manifest v1'
SPLITS = ('train', 'valid', 'test')
COLUMNS = ['clean_path', 'noise_path', 'class_id', 'snr_db', 'seed', 'offset', 'split']
DTYPES = {'clean_path': str, 'noise_path': str, 'class_id': 'int64', 'snr_db': 'float64',
          'seed': 'int64', 'offset': 'int64', 'split': str}


@dataclass
class MixtureManifest:
    rows: pd.DataFrame
    sample_rate: int
    class_names: list
    root: str = ''
    path: str = field(default='', compare=False)

    @property
    def num_classes(self):
        return len(self.class_names)

    def split(self, name):
        if name not in SPLITS:
            raise DataLoadingError(f"Unknown split '{name}'. Choose one of {SPLITS}.")
        return self.rows[self.rows['split'] == name].reset_index(drop=True)

    def counts(self):
        return {name: int((self.rows['split'] == name).sum()) for name in SPLITS}

    def resolve(self, relative_path):
        return os.path.join(self.root, relative_path)

    def validate(self, check_files=True):
        """Checks label range, split names and (optionally) that every referenced file exists."""
        bad_labels = self.rows[(self.rows['class_id'] < 0) | (self.rows['class_id'] >= self.num_classes)]
        if not bad_labels.empty:
            raise DataLoadingError(f"{len(bad_labels)} manifest rows have class ids outside [0, {self.num_classes}).")
        bad_splits = set(self.rows['split']) - set(SPLITS)
        if bad_splits:
            raise DataLoadingError(f"Manifest has unknown splits {sorted(bad_splits)}.")
        if check_files:
            for column in ('clean_path', 'noise_path'):
                for relative in self.rows[column].unique():
                    if not os.path.exists(self.resolve(relative)):
                        raise DataLoadingError(f"Manifest references missing file {self.resolve(relative)}")

    def duplicated_across_splits(self):
        """(clean, noise, offset) triples that occur in more than one split."""
        keys = self.rows[['clean_path', 'noise_path', 'offset', 'split']].drop_duplicates()
        per_triple = keys.groupby(['clean_path', 'noise_path', 'offset'])['split'].nunique()
        return [triple for triple, n in per_triple.items() if n > 1]


def write_manifest(manifest, path):
    lines = [MAGIC_LINE, f'# sample_rate: {manifest.sample_rate}']
    lines += [f'# class {i}: {name}' for i, name in enumerate(manifest.class_names)]
    body = manifest.rows[COLUMNS].to_csv(sep='\t', index=False, lineterminator='\n')

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='\n') as f:
        f.write('\n'.join(lines) + '\n' + body)
    manifest.path = path
    logger.info(f"Manifest with {len(manifest.rows)} rows written to {path}")


def read_manifest(path):
    if not os.path.exists(path):
        raise DataLoadingError(f"Manifest not found at {path}")
    with open(path, 'r') as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != MAGIC_LINE:
        raise DataLoadingError(f"{path} is not a mixture manifest (missing '{MAGIC_LINE}').")

    sample_rate, class_names = None, []
    body_start = 1
    for line in lines[1:]:
        if not line.startswith('# '):
            break
        key, _, value = line[2:].partition(': ')
        if key == 'sample_rate':
            sample_rate = int(value)
        elif key.startswith('class '):
            class_names.append(value)
        body_start += 1
    if sample_rate is None:
        raise DataLoadingError(f"Manifest {path} does not declare a sample rate.")

    try:
        rows = pd.read_csv(io.StringIO('\n'.join(lines[body_start:])), sep='\t', dtype=DTYPES,
                           float_precision='round_trip')
    except (ValueError, pd.errors.ParserError) as e:
        raise DataLoadingError(f"Could not parse manifest rows in {path}: {e}")
    missing = set(COLUMNS) - set(rows.columns)
    if missing:
        raise DataLoadingError(f"Manifest {path} lacks columns {sorted(missing)}.")

    manifest = MixtureManifest(rows=rows[COLUMNS], sample_rate=sample_rate, class_names=class_names,
                               root=os.path.dirname(os.path.abspath(path)), path=path)
    manifest.validate(check_files=True)
    logger.info(f"Loaded manifest {path}: {manifest.counts()}")
    return manifest
