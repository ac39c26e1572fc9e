"""Minimal SVG emission for documentation figures (no plotting dependency)."""


class SvgCanvas:
    def __init__(self, window, width_px=640):
        xmin, xmax, ymin, ymax = map(float, window)
        self.window = (xmin, xmax, ymin, ymax)
        self.scale = width_px / (xmax - xmin)
        self.width = width_px
        self.height = int(round((ymax - ymin) * self.scale))
        self.scale_hint = max(xmax - xmin, ymax - ymin)
        self.items = []

    def _map(self, z):
        xmin, _, _, ymax = self.window
        return ((z.real - xmin) * self.scale, (ymax - z.imag) * self.scale)

    def line(self, a, b, width=1.0, color="#000", dashed=False):
        (x1, y1), (x2, y2) = self._map(complex(a)), self._map(complex(b))
        dash = ' stroke-dasharray="4 3"' if dashed else ""
        self.items.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{color}" stroke-width="{width}"{dash}/>')

    def circle(self, center, radius, fill="none", color="#000", width=1.0):
        x, y = self._map(complex(center))
        self.items.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius * self.scale:.2f}" '
            f'fill="{fill}" stroke="{color}" stroke-width="{width}"/>')

    def write(self, path):
        body = "\n".join(self.items)
        with open(path, "w") as fh:
            fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" '
                     f'width="{self.width}" height="{self.height}">\n{body}\n</svg>\n')
