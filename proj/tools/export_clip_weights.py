#!/usr/bin/env python3
"""Convert a CLIP ViT-B/32 checkpoint into the named-tensor binary format
the C++ encoder loads (magic SSVT0001, float64, column-major).

Usage:
    python tools/export_clip_weights.py ViT-B-32.pt weights/clip_vit_b32.bin

Accepts either a TorchScript archive from the original CLIP release or a
plain state_dict checkpoint. Only the visual tower is exported.
"""

import argparse
import struct
import sys

import numpy as np
import torch


def load_state_dict(path: str):
    try:
        model = torch.jit.load(path, map_location="cpu")
        return model.state_dict()
    except Exception:
        obj = torch.load(path, map_location="cpu")
        if isinstance(obj, dict) and "state_dict" in obj:
            obj = obj["state_dict"]
        if hasattr(obj, "state_dict"):
            obj = obj.state_dict()
        return obj


def write_tensor(f, name: str, arr: np.ndarray):
    # Column-major flattening matches the Eigen::Map on the C++ side.
    data = np.asarray(arr, dtype=np.float64)
    flat = data.flatten(order="F") if data.ndim == 2 else data.ravel()
    encoded = name.encode("utf-8")
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<Q", flat.size))
    f.write(flat.tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("checkpoint")
    ap.add_argument("output")
    args = ap.parse_args()

    sd = load_state_dict(args.checkpoint)
    sd = {k: v for k, v in sd.items() if k.startswith("visual.")}
    if not sd:
        sys.exit("no visual.* tensors found in checkpoint")

    def t(key):
        return sd[key].detach().cpu().numpy().astype(np.float64)

    conv1 = t("visual.conv1.weight")  # [W, 3, P, P]
    width, _, patch, _ = conv1.shape
    pos = t("visual.positional_embedding")  # [tokens, W]
    tokens = pos.shape[0]
    grid = int(round((tokens - 1) ** 0.5))
    image_size = grid * patch
    proj = t("visual.proj")  # [W, embed_dim]
    embed_dim = proj.shape[1]
    depth = 0
    while f"visual.transformer.resblocks.{depth}.ln_1.weight" in sd:
        depth += 1
    heads = width // 64

    with open(args.output, "wb") as f:
        f.write(b"SSVT0001")
        f.write(struct.pack("<6q", image_size, patch, width, depth, heads, embed_dim))
        write_tensor(f, "patch_proj", conv1.reshape(width, -1))
        write_tensor(f, "class_embed", t("visual.class_embedding"))
        write_tensor(f, "pos_embed", pos)
        write_tensor(f, "ln_pre_g", t("visual.ln_pre.weight"))
        write_tensor(f, "ln_pre_b", t("visual.ln_pre.bias"))
        write_tensor(f, "ln_post_g", t("visual.ln_post.weight"))
        write_tensor(f, "ln_post_b", t("visual.ln_post.bias"))
        for i in range(depth):
            p = f"visual.transformer.resblocks.{i}."
            o = f"block{i}."
            write_tensor(f, o + "ln1_g", t(p + "ln_1.weight"))
            write_tensor(f, o + "ln1_b", t(p + "ln_1.bias"))
            write_tensor(f, o + "qkv_w", t(p + "attn.in_proj_weight"))
            write_tensor(f, o + "qkv_b", t(p + "attn.in_proj_bias"))
            write_tensor(f, o + "out_w", t(p + "attn.out_proj.weight"))
            write_tensor(f, o + "out_b", t(p + "attn.out_proj.bias"))
            write_tensor(f, o + "ln2_g", t(p + "ln_2.weight"))
            write_tensor(f, o + "ln2_b", t(p + "ln_2.bias"))
            write_tensor(f, o + "fc_w", t(p + "mlp.c_fc.weight"))
            write_tensor(f, o + "fc_b", t(p + "mlp.c_fc.bias"))
            write_tensor(f, o + "proj_w", t(p + "mlp.c_proj.weight"))
            write_tensor(f, o + "proj_b", t(p + "mlp.c_proj.bias"))
        write_tensor(f, "visual_proj", proj.T)

    print(f"wrote {args.output}: width={width} depth={depth} patch={patch} "
          f"image={image_size} embed={embed_dim}")


if __name__ == "__main__":
    main()
