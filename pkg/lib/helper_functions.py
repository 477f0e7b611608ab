import json
import os
import re
import shutil


def load_json(json_path: str) -> dict:
    """read json file at json_path

    Args:
        json_path (str): path to json

    Returns:
        dict: dictionary from the json at json_path
    """
    json_data = None
    with open(json_path, encoding="utf-8") as file:
        json_data = json.load(file)
    return json_data


def write_json(json_path: str, data: dict):
    with open(json_path, "w", encoding="utf-8") as file:
        json.dump(data, file, indent=2, sort_keys=True)
        file.write("\n")


def resolve_path(path: str, base_directory: str) -> str:
    """relative paths are taken relative to base_directory, then to the working directory"""
    if os.path.isabs(path):
        return path
    candidate = os.path.join(base_directory, path)
    if os.path.exists(candidate):
        return candidate
    return os.path.abspath(path)


def parse_seeds(text: str) -> list[int]:
    """'1..5' (inclusive range), '1,2,7' or a single seed

    Raises:
        ValueError: malformed or empty seed list
    """
    text = text.strip()
    match = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", text)
    if match:
        first, last = int(match.group(1)), int(match.group(2))
        if last < first:
            raise ValueError(f"empty seed range '{text}'")
        return list(range(first, last + 1))
    try:
        seeds = [int(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise ValueError(f"malformed seed list '{text}'")
    if not seeds:
        raise ValueError("seed list must not be empty")
    return seeds


def run_directory(root: str, world: str, variant: str, seed: int) -> str:
    """<root>/<world>/<variant>/seed_<seed>, variant names made path-safe"""
    safe_variant = variant.replace("+", "_")
    return os.path.join(root, world, safe_variant, f"seed_{seed}")


def prepare_run_directory(directory: str) -> str:
    """empty run directory; artifacts of an earlier run at the same place are removed"""
    if os.path.isdir(directory):
        shutil.rmtree(directory)
    os.makedirs(directory)
    return directory


def write_failure_marker(directory: str, error_line: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "FAILED")
    with open(path, "w", encoding="utf-8") as file:
        file.write(error_line.rstrip("\n") + "\n")
    return path
