# -*- coding: utf-8 -*-

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Tuple, Union

from . import config

if config.BOTO3_AVAILABLE:
    import boto3
    from botocore.config import Config as BotoConfig
    from botocore.exceptions import ClientError, NoCredentialsError, PartialCredentialsError
else:
    # Stand-in exception types so the except clauses below stay valid without boto3
    NoCredentialsError = type("NoCredentialsError", (Exception,), {})
    PartialCredentialsError = type("PartialCredentialsError", (Exception,), {})
    ClientError = type("ClientError", (Exception,), {})

log = logging.getLogger(__name__)

MULTIPART_THRESHOLD = 100 * 1024 * 1024
PART_SIZE = 100 * 1024 * 1024


@dataclass
class S3Target:
    bucket: Optional[str] = None
    prefix: Optional[str] = None
    endpoint_url: Optional[str] = None
    region: Optional[str] = None
    access_key: Optional[str] = None
    secret_key: Optional[str] = None

    def key_for(self, name: str) -> str:
        return f"{self.prefix.rstrip('/')}/{name}" if self.prefix else name


def setup_s3_client(target: S3Target) -> Tuple[Optional[Any], bool]:
    """Returns (client, enabled); upload is disabled when no bucket is set or boto3 is missing."""
    if not target.bucket:
        return None, False
    if not config.BOTO3_AVAILABLE:
        log.error("S3 upload requested but boto3 is not installed (pip install boto3); skipping upload")
        return None, False

    kwargs: dict = {
        "config": BotoConfig(signature_version="s3v4", s3={"addressing_style": "auto"}),
    }
    if target.endpoint_url:
        kwargs["endpoint_url"] = target.endpoint_url
    if target.region:
        kwargs["region_name"] = target.region
    if target.access_key and target.secret_key:
        kwargs["aws_access_key_id"] = target.access_key
        kwargs["aws_secret_access_key"] = target.secret_key
    try:
        client = boto3.client("s3", **kwargs)
    except Exception as e:
        log.error(f"Failed to initialize S3 client: {e}")
        return None, False
    log.info(f"S3 client initialized for bucket {target.bucket}")
    return client, True


def upload_archive(archive_path: Union[str, Path], client: Any, target: S3Target,
                   part_size: int = PART_SIZE, multipart_threshold: int = MULTIPART_THRESHOLD) -> bool:
    """Uploads a run archive; True on success. Failures are logged, never raised."""
    archive_path = Path(archive_path)
    key = target.key_for(archive_path.name)
    try:
        size = archive_path.stat().st_size
        log.info(f"☁️  Uploading {archive_path.name} to s3://{target.bucket}/{key} ({size / (1024 * 1024):.1f} MB)")
        if size > multipart_threshold:
            _multipart_upload(client, archive_path, target.bucket, key, part_size)
        else:
            with open(archive_path, "rb") as f:
                client.put_object(Bucket=target.bucket, Key=key, Body=f.read())
        log.info(f"✅ Uploaded s3://{target.bucket}/{key}")
        return True
    except (NoCredentialsError, PartialCredentialsError) as e:
        log.error(f"S3 credentials missing for run archive upload: {e}")
    except ClientError as e:
        log.error(f"S3 client error uploading to s3://{target.bucket}/{key}: {e}")
    except Exception as e:
        log.error(f"Unexpected error uploading to s3://{target.bucket}/{key}: {e}", exc_info=True)
    return False


def _multipart_upload(client: Any, archive_path: Path, bucket: str, key: str, part_size: int) -> None:
    upload_id = client.create_multipart_upload(Bucket=bucket, Key=key)["UploadId"]
    parts = []
    try:
        with open(archive_path, "rb") as f:
            for number, chunk in enumerate(iter(lambda: f.read(part_size), b""), start=1):
                log.info(f"Uploading part {number} ({len(chunk) / (1024 * 1024):.1f} MB)")
                response = client.upload_part(Bucket=bucket, Key=key, PartNumber=number,
                                              UploadId=upload_id, Body=chunk)
                parts.append({"ETag": response["ETag"], "PartNumber": number})
        client.complete_multipart_upload(Bucket=bucket, Key=key, UploadId=upload_id,
                                         MultipartUpload={"Parts": parts})
        log.info(f"Multipart upload finished ({len(parts)} parts)")
    except Exception as e:
        log.error(f"Multipart upload failed, aborting: {e}")
        try:
            client.abort_multipart_upload(Bucket=bucket, Key=key, UploadId=upload_id)
        except Exception as abort_error:
            log.error(f"Failed to abort multipart upload: {abort_error}")
        raise
