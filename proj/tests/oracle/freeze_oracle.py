#!/usr/bin/env python3
"""Decode fixture APKs with androguard and freeze the results as JSON.

usage: freeze_oracle.py <apk>... --out <dir>

For every APK writes <stem>.oracle.json holding the default-configuration
string resources, the strings loaded by const-string, const-string/jumbo or
a String static initializer (with their number of load sites), and per-method
instruction offsets. The C++ suite compares its own decoders against these
files, so the androguard dependency is needed only to regenerate them.
"""

import argparse
import collections
import hashlib
import json
import os
import sys
import types
import zipfile


def _install_mutf8_fallback():
    # androguard imports the `mutf8` package; fall back to the codec machinery
    # of the standard library when it is not installed.
    try:
        import mutf8  # noqa: F401
        return
    except ImportError:
        pass
    mod = types.ModuleType("mutf8")

    def decode_modified_utf8(data):
        data = bytes(data).replace(b"\xc0\x80", b"\x00")
        units = data.decode("utf-8", "surrogatepass").encode("utf-16-le", "surrogatepass")
        return units.decode("utf-16-le", "replace")

    def encode_modified_utf8(text):
        raise NotImplementedError

    mod.decode_modified_utf8 = decode_modified_utf8
    mod.encode_modified_utf8 = encode_modified_utf8
    sys.modules["mutf8"] = mod


_install_mutf8_fallback()

from loguru import logger  # noqa: E402

logger.remove()

from androguard.core import axml, dex  # noqa: E402

STRING_TYPE = 0x03
VALUE_STRING = 0x17


def resource_strings(arsc_bytes):
    """[name, qualifier, value] for every string-typed literal, all configs."""
    parser = axml.ARSCParser(arsc_bytes)
    parser._analyse()
    out = []
    for package in parser.get_packages_names():
        for name, res_id in parser.resource_keys[package]["string"].items():
            for config, entry in parser.resource_values[res_id].items():
                if entry.is_complex() or entry.is_compact():
                    continue
                if entry.key.data_type != STRING_TYPE:
                    continue
                value = parser.stringpool_main.getString(entry.key.data)
                out.append([name, config.get_qualifier(), value])
    return sorted(out)


def dex_facts(dex_bytes):
    d = dex.DEX(dex_bytes)
    strings = collections.Counter()
    methods = []
    for m in d.get_encoded_methods():
        code = m.get_code()
        if code is None:
            continue
        offsets = []
        pos = 0
        for ins in m.get_instructions():
            offsets.append(pos)
            if ins.get_op_value() in (0x1A, 0x1B):
                strings[ins.get_raw_string()] += 1
            pos += ins.get_length() // 2
        methods.append({
            "class": m.get_class_name(),
            "name": m.get_name(),
            "descriptor": m.get_descriptor().replace(" ", ""),
            "insns_size": code.get_insns_size(),
            "offsets": offsets,
        })
    for c in d.get_classes():
        if c.static_values is None:
            continue
        for v in c.static_values.get_value().get_values():
            if v.get_value_type() == VALUE_STRING:
                strings[v.get_value()] += 1
    return strings, methods


def freeze(apk_path):
    with zipfile.ZipFile(apk_path) as z:
        names = z.namelist()
        arsc = z.read("resources.arsc") if "resources.arsc" in names else None
        dex_names = sorted(
            (n for n in names if n.startswith("classes") and n.endswith(".dex")),
            key=lambda n: int(n[7:-4] or 1),
        )
        code_strings = collections.Counter()
        methods = []
        for i, name in enumerate(dex_names):
            s, ms = dex_facts(z.read(name))
            code_strings.update(s)
            for m in ms:
                m["dex_index"] = i
            methods.extend(ms)
    resources = resource_strings(arsc) if arsc is not None else []
    with open(apk_path, "rb") as f:
        digest = hashlib.sha256(f.read()).hexdigest()
    return {
        "apk": os.path.basename(apk_path),
        "sha256": digest,
        "decoder": "androguard " + getattr(sys.modules["androguard"], "__version__", "?"),
        "resource_strings": resources,
        "xml_strings": [[n, v] for n, q, v in resources if q == ""],
        "code_strings": sorted(code_strings),
        "code_string_sites": dict(sorted(code_strings.items())),
        "methods": methods,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("apks", nargs="+")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for apk in args.apks:
        facts = freeze(apk)
        stem = os.path.splitext(os.path.basename(apk))[0]
        path = os.path.join(args.out, stem + ".oracle.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(facts, f, indent=1, ensure_ascii=False, sort_keys=True)
            f.write("\n")
        print(path, len(facts["xml_strings"]), len(facts["code_strings"]))


if __name__ == "__main__":
    main()
