#include "tlsbench/response_map.hpp"

#include <algorithm>
#include <cmath>

namespace tlsbench {

ResponseMap ResponseMap::blank(int width, int height, double pitch, Vec2 origin) {
  ResponseMap m;
  m.width = width;
  m.height = height;
  m.pixel_pitch_um = pitch;
  m.origin = origin;
  m.values.assign(static_cast<std::size_t>(width) * height, 0.0);
  return m;
}

double ResponseMap::sample(Vec2 pos) const {
  const double fx = std::clamp((pos.x - origin.x) / pixel_pitch_um - 0.5, 0.0, width - 1.0);
  const double fy = std::clamp((pos.y - origin.y) / pixel_pitch_um - 0.5, 0.0, height - 1.0);
  const int x0 = std::min(static_cast<int>(fx), width - 1);
  const int y0 = std::min(static_cast<int>(fy), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double tx = fx - x0, ty = fy - y0;
  const double top = at(x0, y1) * (1 - tx) + at(x1, y1) * tx;
  const double bottom = at(x0, y0) * (1 - tx) + at(x1, y0) * tx;
  return bottom * (1 - ty) + top * ty;
}

}  // namespace tlsbench
