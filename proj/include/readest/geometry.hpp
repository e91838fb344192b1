#pragma once

namespace readest {

struct Point {
  double x = 0;
  double y = 0;
};

// Axis-aligned box with origin at the top-left corner; y grows downward.
struct Rect {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool empty() const { return !(w > 0 && h > 0); }
  Point center() const { return {x + w / 2, y + h / 2}; }

  bool contains(Point p) const { return p.x >= x && p.x <= right() && p.y >= y && p.y <= bottom(); }
  Rect translated(double dx, double dy) const { return {x + dx, y + dy, w, h}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Intersection of two boxes; an empty result is returned as the zero box.
Rect intersect(const Rect& a, const Rect& b);

// Euclidean distance from p to the closest point of r (0 when p is inside).
double distance(const Rect& r, Point p);

double distance(Point a, Point b);

}  // namespace readest
