import pytest

from echotriage.dicom import write_dicom
from echotriage.phantom import PhantomSpec, render_phantom, spec_for_target_lvef


@pytest.fixture
def make_phantom_study(tmp_path):
    """Factory writing a phantom study directory; returns (dir, clip, ground-truth masks)."""

    counter = {"n": 0}

    def build(spec=None, views=("A4C",), study_name=None, lvef=None, seed=7):
        counter["n"] += 1
        if spec is None:
            if lvef is not None:
                spec = spec_for_target_lvef(lvef, frames_per_cycle=20, n_cycles=3,
                                            noise_seed=seed)
            else:
                spec = PhantomSpec(frames_per_cycle=20, n_cycles=3, noise_seed=seed)
        name = study_name or f"study{counter['n']:02d}"
        study_dir = tmp_path / name
        study_dir.mkdir()
        study_id = f"1.2.826.0.1.{counter['n']}"
        rendered = {}
        for view in views:
            clip, masks = render_phantom(spec, study_id=study_id, view_hint=view)
            (study_dir / f"{view.lower()}.dcm").write_bytes(write_dicom(clip))
            rendered[view] = (clip, masks)
        return study_dir, spec, rendered

    return build
