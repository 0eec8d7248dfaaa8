import json

import pytest

from detcurate.anno import AnnotatedImage, BoundingBox, Dataset


@pytest.fixture
def simple_gt_dict():
    return {
        "images": [
            {"id": "img-1", "width": 100, "height": 100},
            {"id": "img-2", "width": 200, "height": 150},
        ],
        "annotations": [
            {"image_id": "img-1", "category_id": 1, "bbox": [10, 10, 20, 20]},
            {"image_id": "img-2", "category_id": 1, "bbox": [5, 5, 50, 40]},
            {"image_id": "img-2", "category_id": 2, "bbox": [100, 30, 30, 30]},
        ],
        "categories": [{"id": 1, "name": "car"}, {"id": 2, "name": "fish"}],
    }


@pytest.fixture
def gt_file(tmp_path, simple_gt_dict):
    path = tmp_path / "gt.json"
    path.write_text(json.dumps(simple_gt_dict), encoding="utf-8")
    return path


@pytest.fixture
def one_image_dataset():
    return Dataset(
        categories={1: "object"},
        images=(
            AnnotatedImage("im", 100.0, 100.0, ((BoundingBox(10, 10, 20, 20), 1),)),
        ),
    )


def write_detections(tmp_path, records, name="dets.json"):
    path = tmp_path / name
    path.write_text(json.dumps(records), encoding="utf-8")
    return path
