# -*- coding: utf-8 -*-
import zipfile

import pytest

from src.archive import create_run_archive
from src.s3 import S3Target, setup_s3_client, upload_archive


class FakeS3Client:
    def __init__(self, fail_on_part=None):
        self.objects = {}
        self.parts = []
        self.completed = None
        self.aborted = False
        self.fail_on_part = fail_on_part

    def put_object(self, Bucket, Key, Body):
        self.objects[(Bucket, Key)] = Body

    def create_multipart_upload(self, Bucket, Key):
        return {"UploadId": "up-1"}

    def upload_part(self, Bucket, Key, PartNumber, UploadId, Body):
        if PartNumber == self.fail_on_part:
            raise RuntimeError("connection reset")
        self.parts.append((PartNumber, len(Body)))
        return {"ETag": f"etag-{PartNumber}"}

    def complete_multipart_upload(self, Bucket, Key, UploadId, MultipartUpload):
        self.completed = MultipartUpload["Parts"]

    def abort_multipart_upload(self, Bucket, Key, UploadId):
        self.aborted = True


@pytest.fixture
def run_dir(tmp_path):
    d = tmp_path / "run"
    d.mkdir()
    (d / "checkpoint.json").write_text("{}", encoding="utf-8")
    (d / "train_log.jsonl").write_text('{"epoch": 1}\n', encoding="utf-8")
    return d


def test_create_run_archive(run_dir, tmp_path):
    ok, path, name = create_run_archive(run_dir, label="syntax n=4", archive_dir=tmp_path / "archives")
    assert ok
    assert name.startswith("run_") and name.endswith("_syntax_n=4.zip")
    with zipfile.ZipFile(path) as zf:
        names = {n.lstrip("./") for n in zf.namelist()}
    assert {"checkpoint.json", "train_log.jsonl"} <= names


def test_archive_of_missing_directory(tmp_path):
    assert create_run_archive(tmp_path / "nope", archive_dir=tmp_path) == (False, None, None)


def test_key_for_prefix():
    assert S3Target(prefix="sdatt/runs/").key_for("a.zip") == "sdatt/runs/a.zip"
    assert S3Target().key_for("a.zip") == "a.zip"


def test_upload_disabled_without_bucket():
    assert setup_s3_client(S3Target()) == (None, False)


def test_simple_upload(tmp_path):
    archive = tmp_path / "run.zip"
    archive.write_bytes(b"x" * 100)
    client = FakeS3Client()
    assert upload_archive(archive, client, S3Target(bucket="b", prefix="p"))
    assert client.objects[("b", "p/run.zip")] == b"x" * 100


def test_multipart_upload(tmp_path):
    archive = tmp_path / "run.zip"
    archive.write_bytes(b"y" * 250)
    client = FakeS3Client()
    assert upload_archive(archive, client, S3Target(bucket="b"), part_size=100, multipart_threshold=50)
    assert client.parts == [(1, 100), (2, 100), (3, 50)]
    assert [p["PartNumber"] for p in client.completed] == [1, 2, 3]
    assert not client.aborted


def test_failed_multipart_upload_is_aborted(tmp_path):
    archive = tmp_path / "run.zip"
    archive.write_bytes(b"z" * 250)
    client = FakeS3Client(fail_on_part=2)
    assert not upload_archive(archive, client, S3Target(bucket="b"), part_size=100, multipart_threshold=50)
    assert client.aborted
    assert client.completed is None
