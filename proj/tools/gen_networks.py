#!/usr/bin/env python3
"""Writes the bundled layer-shape configs under configs/.

Shapes follow the public architecture definitions. Pooling layers are not
modelled; their effect shows up as the next layer's input size.
"""
import json
import os
import sys


class Net:
    def __init__(self, name):
        self.name = name
        self.layers = []

    def conv(self, id, x, y, ic, oc, f, stride=1, pad=None, groups=1):
        fx, fy = (f, f) if isinstance(f, int) else f
        if pad is None:
            pad = (fx // 2, fy // 2)
        elif isinstance(pad, int):
            pad = (pad, pad)
        l = {"id": id, "op": "conv", "ix": x, "iy": y, "ic": ic, "fx": fx, "fy": fy, "oc": oc,
             "stride": stride, "pad": pad[0] if pad[0] == pad[1] else list(pad)}
        if groups != 1:
            l["groups"] = groups
        self.layers.append(l)
        ox = (x + 2 * pad[0] - fx) // stride + 1
        oy = (y + 2 * pad[1] - fy) // stride + 1
        return ox, oy

    def add(self, id, x, y, c):
        self.layers.append({"id": id, "op": "eltwise", "ix": x, "iy": y, "ic": c})

    def dump(self, path):
        with open(path, "w") as f:
            json.dump({"name": self.name, "layers": self.layers}, f, indent=1)
            f.write("\n")


def resnet(name, blocks):
    n = Net(name)
    s, _ = n.conv("conv1", 224, 224, 3, 64, 7, 2, 3)
    s = (s - 1) // 2 + 1  # 3x3/2 max pool, pad 1
    c = 64
    for stage, (count, width) in enumerate(zip(blocks, [64, 128, 256, 512]), start=2):
        for b in range(count):
            stride = 2 if b == 0 and stage > 2 else 1
            p = f"res{stage}{chr(ord('a') + b) if count <= 6 else 'b' + str(b) if b else 'a'}"
            out = width * 4
            if b == 0:
                n.conv(p + "_proj", s, s, c, out, 1, stride, 0)
            n.conv(p + "_1x1a", s, s, c, width, 1, 1, 0)
            o, _ = n.conv(p + "_3x3", s, s, width, width, 3, stride, 1)
            n.conv(p + "_1x1b", o, o, width, out, 1, 1, 0)
            n.add(p + "_add", o, o, out)
            s, c = o, out
    n.conv("fc", 1, 1, c, 1000, 1, 1, 0)
    return n


def mobilenetv2():
    n = Net("mobilenetv2")
    s, _ = n.conv("conv1", 224, 224, 3, 32, 3, 2, 1)
    c = 32
    cfg = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    k = 0
    for t, out, reps, stride in cfg:
        for r in range(reps):
            k += 1
            st = stride if r == 0 else 1
            hid = c * t
            p = f"block{k}"
            if t != 1:
                n.conv(p + "_expand", s, s, c, hid, 1, 1, 0)
            o, _ = n.conv(p + "_dw", s, s, hid, hid, 3, st, 1, groups=hid)
            n.conv(p + "_project", o, o, hid, out, 1, 1, 0)
            if st == 1 and c == out:
                n.add(p + "_add", o, o, out)
            s, c = o, out
    n.conv("conv_last", s, s, c, 1280, 1, 1, 0)
    n.conv("fc", 1, 1, 1280, 1000, 1, 1, 0)
    return n


def googlenet():
    n = Net("googlenet")
    s, _ = n.conv("conv1", 224, 224, 3, 64, 7, 2, 3)
    s = 56
    n.conv("conv2_reduce", s, s, 64, 64, 1, 1, 0)
    n.conv("conv2", s, s, 64, 192, 3, 1, 1)
    s, c = 28, 192
    cfg = [("3a", 64, 96, 128, 16, 32, 32), ("3b", 128, 128, 192, 32, 96, 64), None,
           ("4a", 192, 96, 208, 16, 48, 64), ("4b", 160, 112, 224, 24, 64, 64), ("4c", 128, 128, 256, 24, 64, 64),
           ("4d", 112, 144, 288, 32, 64, 64), ("4e", 256, 160, 320, 32, 128, 128), None,
           ("5a", 256, 160, 320, 32, 128, 128), ("5b", 384, 192, 384, 48, 128, 128)]
    for m in cfg:
        if m is None:
            s //= 2
            continue
        name, b1, r3, b3, r5, b5, pp = m
        p = "inc" + name
        n.conv(p + "_1x1", s, s, c, b1, 1, 1, 0)
        n.conv(p + "_3x3_reduce", s, s, c, r3, 1, 1, 0)
        n.conv(p + "_3x3", s, s, r3, b3, 3, 1, 1)
        n.conv(p + "_5x5_reduce", s, s, c, r5, 1, 1, 0)
        n.conv(p + "_5x5", s, s, r5, b5, 5, 1, 2)
        n.conv(p + "_pool_proj", s, s, c, pp, 1, 1, 0)
        c = b1 + b3 + b5 + pp
    n.conv("fc", 1, 1, c, 1000, 1, 1, 0)
    return n


def inceptionv3():
    n = Net("inceptionv3")
    s, _ = n.conv("conv1a_3x3", 299, 299, 3, 32, 3, 2, 0)
    s, _ = n.conv("conv2a_3x3", s, s, 32, 32, 3, 1, 0)
    s, _ = n.conv("conv2b_3x3", s, s, 32, 64, 3, 1, 1)
    s = (s - 3) // 2 + 1
    s, _ = n.conv("conv3b_1x1", s, s, 64, 80, 1, 1, 0)
    s, _ = n.conv("conv4a_3x3", s, s, 80, 192, 3, 1, 0)
    s = (s - 3) // 2 + 1
    c = 192
    for name, pool in (("5b", 32), ("5c", 64), ("5d", 64)):
        p = "mixed" + name
        n.conv(p + "_1x1", s, s, c, 64, 1, 1, 0)
        n.conv(p + "_5x5_reduce", s, s, c, 48, 1, 1, 0)
        n.conv(p + "_5x5", s, s, 48, 64, 5, 1, 2)
        n.conv(p + "_3x3dbl_reduce", s, s, c, 64, 1, 1, 0)
        n.conv(p + "_3x3dbl_1", s, s, 64, 96, 3, 1, 1)
        n.conv(p + "_3x3dbl_2", s, s, 96, 96, 3, 1, 1)
        n.conv(p + "_pool_proj", s, s, c, pool, 1, 1, 0)
        c = 64 + 64 + 96 + pool
    p = "mixed6a"
    o, _ = n.conv(p + "_3x3", s, s, c, 384, 3, 2, 0)
    n.conv(p + "_3x3dbl_reduce", s, s, c, 64, 1, 1, 0)
    n.conv(p + "_3x3dbl_1", s, s, 64, 96, 3, 1, 1)
    n.conv(p + "_3x3dbl_2", s, s, 96, 96, 3, 2, 0)
    s, c = o, 384 + 96 + c
    for name, m in (("6b", 128), ("6c", 160), ("6d", 160), ("6e", 192)):
        p = "mixed" + name
        n.conv(p + "_1x1", s, s, c, 192, 1, 1, 0)
        n.conv(p + "_7x7_reduce", s, s, c, m, 1, 1, 0)
        n.conv(p + "_7x7_1x7", s, s, m, m, (7, 1), 1, (3, 0))
        n.conv(p + "_7x7_7x1", s, s, m, 192, (1, 7), 1, (0, 3))
        n.conv(p + "_7x7dbl_reduce", s, s, c, m, 1, 1, 0)
        n.conv(p + "_7x7dbl_1", s, s, m, m, (1, 7), 1, (0, 3))
        n.conv(p + "_7x7dbl_2", s, s, m, m, (7, 1), 1, (3, 0))
        n.conv(p + "_7x7dbl_3", s, s, m, m, (1, 7), 1, (0, 3))
        n.conv(p + "_7x7dbl_4", s, s, m, 192, (7, 1), 1, (3, 0))
        n.conv(p + "_pool_proj", s, s, c, 192, 1, 1, 0)
        c = 768
    p = "mixed7a"
    n.conv(p + "_3x3_reduce", s, s, c, 192, 1, 1, 0)
    o, _ = n.conv(p + "_3x3", s, s, 192, 320, 3, 2, 0)
    n.conv(p + "_7x7x3_reduce", s, s, c, 192, 1, 1, 0)
    n.conv(p + "_7x7x3_1x7", s, s, 192, 192, (7, 1), 1, (3, 0))
    n.conv(p + "_7x7x3_7x1", s, s, 192, 192, (1, 7), 1, (0, 3))
    n.conv(p + "_7x7x3_3x3", s, s, 192, 192, 3, 2, 0)
    s, c = o, 320 + 192 + c
    for name in ("7b", "7c"):
        p = "mixed" + name
        n.conv(p + "_1x1", s, s, c, 320, 1, 1, 0)
        n.conv(p + "_3x3_reduce", s, s, c, 384, 1, 1, 0)
        n.conv(p + "_3x3_1x3", s, s, 384, 384, (3, 1), 1, (1, 0))
        n.conv(p + "_3x3_3x1", s, s, 384, 384, (1, 3), 1, (0, 1))
        n.conv(p + "_3x3dbl_reduce", s, s, c, 448, 1, 1, 0)
        n.conv(p + "_3x3dbl_3x3", s, s, 448, 384, 3, 1, 1)
        n.conv(p + "_3x3dbl_1x3", s, s, 384, 384, (3, 1), 1, (1, 0))
        n.conv(p + "_3x3dbl_3x1", s, s, 384, 384, (1, 3), 1, (0, 1))
        n.conv(p + "_pool_proj", s, s, c, 192, 1, 1, 0)
        c = 320 + 768 + 768 + 192
    n.conv("fc", 1, 1, c, 1000, 1, 1, 0)
    return n


def yolov2():
    n = Net("yolov2")
    s, c, k = 416, 3, 0
    body = [(32, 3), "M", (64, 3), "M", (128, 3), (64, 1), (128, 3), "M", (256, 3), (128, 1), (256, 3), "M",
            (512, 3), (256, 1), (512, 3), (256, 1), (512, 3), "M", (1024, 3), (512, 1), (1024, 3), (512, 1),
            (1024, 3)]
    for item in body:
        if item == "M":
            s //= 2
            continue
        out, f = item
        k += 1
        n.conv(f"conv{k}", s, s, c, out, f, 1, f // 2)
        c = out
    n.conv("conv19", s, s, 1024, 1024, 3, 1, 1)
    n.conv("conv20", s, s, 1024, 1024, 3, 1, 1)
    n.conv("passthrough", 26, 26, 512, 64, 1, 1, 0)
    n.conv("conv21", s, s, 1024 + 256, 1024, 3, 1, 1)
    n.conv("detect", s, s, 1024, 425, 1, 1, 0)
    return n


SPARSITY = {"resnet50": (0.61, 0.55), "mobilenetv2": (0.52, 0.30), "googlenet": (0.24, 0.58),
            "inceptionv3": (0.61, 0.63)}


def main(out):
    os.makedirs(out, exist_ok=True)
    nets = [resnet("resnet50", [3, 4, 6, 3]), resnet("resnet101", [3, 4, 23, 3]), mobilenetv2(), googlenet(),
            inceptionv3(), yolov2()]
    for net in nets:
        net.dump(os.path.join(out, f"{net.name}_shapes.json"))
        if net.name in SPARSITY:
            ws, act = SPARSITY[net.name]
            with open(os.path.join(out, f"{net.name}_sparsity.json"), "w") as f:
                json.dump({"note": "placeholder: network-level averages applied to every layer; "
                                   "replace with measured per-layer values",
                           "ws": ws, "as": act, "layers": []}, f, indent=1)
                f.write("\n")
        print(f"{net.name}: {len(net.layers)} layers")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "configs"))
