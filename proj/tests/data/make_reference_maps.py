#!/usr/bin/env python3
"""Generate the MRC reference volumes used by the reader tests.

Written with plain struct packing on purpose: these files must come from an
implementation that shares no code with the C++ reader. Both volumes store
the voxel value pattern v(x,y,z) = x + 10*y + 100*z + C so any axis mix-up
shows up as a wrong value, not just a wrong shape.

  ref_mode2_xyz.mrc      float32, mapc/mapr/maps = 1,2,3, spacing 1.5
  ref_mode1_permuted.mrc int16,   mapc/mapr/maps = 2,1,3, spacing 2.0
"""

import struct
import sys
from pathlib import Path


def mrc_header(ncol, nrow, nsec, mode, m, cella, mapcrs, origin, dmin, dmax, dmean, rms):
    h = bytearray(1024)
    struct.pack_into("<3i", h, 0, ncol, nrow, nsec)
    struct.pack_into("<i", h, 12, mode)
    struct.pack_into("<3i", h, 16, 0, 0, 0)          # nxstart/nystart/nzstart
    struct.pack_into("<3i", h, 28, *m)               # mx/my/mz, crystal axes
    struct.pack_into("<3f", h, 40, *cella)           # cell edge, crystal axes
    struct.pack_into("<3f", h, 52, 90.0, 90.0, 90.0)
    struct.pack_into("<3i", h, 64, *mapcrs)          # mapc/mapr/maps
    struct.pack_into("<3f", h, 76, dmin, dmax, dmean)
    struct.pack_into("<i", h, 88, 1)                 # ispg: 3D volume
    struct.pack_into("<i", h, 92, 0)                 # nsymbt
    struct.pack_into("<i", h, 108, 20141)            # nversion, MRC2014 update 1
    struct.pack_into("<3f", h, 196, *origin)
    h[208:212] = b"MAP "
    h[212:216] = bytes([0x44, 0x41, 0x00, 0x00])     # little-endian stamp
    struct.pack_into("<f", h, 216, rms)
    struct.pack_into("<i", h, 220, 0)                # nlabl
    return bytes(h)


def value(x, y, z, offset):
    return x + 10 * y + 100 * z + offset


def write_mode2(path):
    nx, ny, nz = 4, 3, 2
    spacing = 1.5
    vals = [value(x, y, z, -2.5) for z in range(nz) for y in range(ny) for x in range(nx)]
    dmin, dmax = min(vals), max(vals)
    dmean = sum(vals) / len(vals)
    rms = (sum((v - dmean) ** 2 for v in vals) / len(vals)) ** 0.5
    header = mrc_header(
        nx, ny, nz, 2,
        (nx, ny, nz),
        (nx * spacing, ny * spacing, nz * spacing),
        (1, 2, 3),
        (3.0, -4.5, 6.0),
        dmin, dmax, dmean, rms,
    )
    payload = struct.pack(f"<{len(vals)}f", *vals)
    path.write_bytes(header + payload)


def write_mode1_permuted(path):
    nx, ny, nz = 4, 3, 2
    spacing = 2.0
    # mapc = 2: columns advance along Y; mapr = 1: rows along X; maps = 3.
    ncol, nrow, nsec = ny, nx, nz
    vals = [value(x, y, z, -5) for z in range(nz) for x in range(nx) for y in range(ny)]
    dmin, dmax = min(vals), max(vals)
    dmean = sum(vals) / len(vals)
    rms = (sum((v - dmean) ** 2 for v in vals) / len(vals)) ** 0.5
    header = mrc_header(
        ncol, nrow, nsec, 1,
        (nx, ny, nz),
        (nx * spacing, ny * spacing, nz * spacing),
        (2, 1, 3),
        (1.0, 2.0, 3.0),
        dmin, dmax, dmean, rms,
    )
    payload = struct.pack(f"<{len(vals)}h", *vals)
    path.write_bytes(header + payload)


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    write_mode2(out_dir / "ref_mode2_xyz.mrc")
    write_mode1_permuted(out_dir / "ref_mode1_permuted.mrc")
    print(f"wrote reference maps to {out_dir}")


if __name__ == "__main__":
    main()
