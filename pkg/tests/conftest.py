import warnings

import pytest
import torch

torch.set_num_threads(2)

# Soft length checks warn on purpose-built short test sequences; keep the
# signal out of test output but never silence other warnings.
warnings.filterwarnings("ignore", message=".*far from typical.*")


@pytest.fixture
def tiny_dataset():
    """Deterministic 3-antibody x 3-antigen dataset with both assay types."""
    from abag_bench.dataset import (
        Antibody, Antigen, Assay, AssayRecord, Dataset, Epitope,
        HeavyIsotype, Host, LightIsotype, Origin, Subtype, YearCategory,
    )

    antibodies = {
        f"ab{i}": Antibody(
            id=f"ab{i}",
            heavy_var="ACDEFGHIKLMNPQRSTVWY" * 5 + "ACD" * i,
            light_var="YWVTSRQPNMLKIHGFEDCA" * 6,
            host=Host.HUMAN if i < 2 else Host.MOUSE,
            lc_isotype=LightIsotype.KAPPA if i % 2 == 0 else LightIsotype.LAMBDA,
            hc_isotype=HeavyIsotype.IGG,
            epitope=Epitope.CONFORMATIONAL,
        )
        for i in range(3)
    }
    antigens = {
        f"ag{j}": Antigen(
            id=f"ag{j}",
            sequence="ACDEFGHIKLMNPQRSTVWY" * 28,
            subtype=Subtype.H1 if j % 2 == 0 else Subtype.H3,
            year_category=YearCategory.POST2010,
            origin=Origin.PUBLIC,
        )
        for j in range(3)
    }
    records = []
    values = {Assay.BINDING: [5.0, 0.8, 2.0, 1.0, 18.0, 0.6, 3.0, 0.9, 7.0],
              Assay.HAI: [1.0, 15.0, 0.05, 10.0, 5.0, 19.0, 0.5, 12.0, 8.0]}
    for assay, vals in values.items():
        idx = 0
        for i in range(3):
            for j in range(3):
                records.append(AssayRecord(f"ab{i}", f"ag{j}", assay, vals[idx]))
                idx += 1
    return Dataset(antibodies=antibodies, antigens=antigens, records=tuple(records))
