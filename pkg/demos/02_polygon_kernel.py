"""The polygon operations behind area marking, checked against closed forms."""

import math

from shapely.geometry import box

from haulmap import geometry as geo

# a 120 degree sector of radius 30 m, arc cut into n chords
for n in (4, 8, 16, 32):
    s = geo.make_sector((0, 0), 0.0, 30.0, math.radians(120), n)
    print(f"sector n={n:2d}: {s.area:7.2f} m2  ({s.area / (300 * math.pi):.4%} of the true sector)")

square = box(0, 0, 10, 10)
print("dilate 10x10 by 1 m:", round(geo.buffer(square, 1.0).area, 2), "expected", round(140 + math.pi, 2))
print("erode 10x10 by 1 m:", round(geo.buffer(square, -1.0).area, 2))
print("erode 1x1 by 1 m is empty:", geo.buffer(box(0, 0, 1, 1), -1.0).is_empty)

# closing bridges a narrow slit but not a wide gap
pair = geo.union([box(0, 0, 30, 30), box(31.5, 0, 61.5, 30)])
print("1.5 m slit, dilate 11 / erode 10:", len(geo.close(pair, 11, 10).geoms), "component(s)")
pair = geo.union([box(0, 0, 30, 30), box(55, 0, 85, 30)])
print("25 m gap,  dilate 11 / erode 10:", len(geo.close(pair, 11, 10).geoms), "component(s)")

corridor = geo.buffer_polyline([(0, 0), (10, 0)], 5.0)
print("5 m corridor round a 10 m segment:", round(corridor.area, 1), "m2")
