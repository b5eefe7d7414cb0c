#include "wmtrace/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"

namespace wmtrace::attacks {
namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;
  return k;
}

// Source coordinates and weights for one output axis.
struct Tap {
  int i0, i1;
  double w1;
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[o] = Tap{i0, i1, s - i0};
  }
  return taps;
}

Raster map_channels(const Raster& img, auto&& fn) {
  Raster out;
  for (Channel ch : {Channel::Red, Channel::Green, Channel::Blue}) {
    const Plane p = fn(signal::channel_plane(img, ch));
    if (out.data.empty()) out = Raster(p.width, p.height);
    signal::store_channel(out, ch, p);
  }
  return out;
}

}  // namespace

void AttackSpec::validate() const {
  if (!(blur_sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "blur sigma must be positive");
  if (jpeg_quality < 1 || jpeg_quality > 100) throw Error(ErrorCode::InvalidArgument, "JPEG quality must be 1..100");
  if (!(resize_factor > 0.0 && resize_factor < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "resize factor must be in (0, 1)");
  }
}

std::string_view kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::GaussianBlur: return "gaussian_blur";
    case AttackKind::Jpeg: return "jpeg";
    case AttackKind::Resize: return "resize";
  }
  return "none";
}

AttackKind parse_kind(std::string_view name) {
  if (name == "none") return AttackKind::None;
  if (name == "gaussian_blur" || name == "blur") return AttackKind::GaussianBlur;
  if (name == "jpeg") return AttackKind::Jpeg;
  if (name == "resize") return AttackKind::Resize;
  throw Error(ErrorCode::InvalidArgument, "unknown attack kind '" + std::string(name) + "'");
}

Plane gaussian_blur(const Plane& plane, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Plane tmp(plane.width, plane.height);
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * plane.at(std::clamp(x + i, 0, plane.width - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  Plane out(plane.width, plane.height);
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, plane.height - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

Plane resize_bilinear(const Plane& plane, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::CarrierTooSmall, "resize target is empty");
  const auto tx = bilinear_taps(plane.width, width);
  const auto ty = bilinear_taps(plane.height, height);
  Plane out(width, height);
  for (int y = 0; y < height; ++y) {
    const Tap& v = ty[y];
    for (int x = 0; x < width; ++x) {
      const Tap& h = tx[x];
      const double top = plane.at(h.i0, v.i0) * (1.0 - h.w1) + plane.at(h.i1, v.i0) * h.w1;
      const double bottom = plane.at(h.i0, v.i1) * (1.0 - h.w1) + plane.at(h.i1, v.i1) * h.w1;
      out.at(x, y) = top * (1.0 - v.w1) + bottom * v.w1;
    }
  }
  return out;
}

Raster apply_attack(const Raster& img, const AttackSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::None:
      return img;
    case AttackKind::GaussianBlur:
      return map_channels(img, [&](const Plane& p) { return gaussian_blur(p, spec.blur_sigma); });
    case AttackKind::Jpeg: {
      const auto bytes = io::encode_jpeg(img, spec.jpeg_quality);
      return io::decode_image(bytes);
    }
    case AttackKind::Resize: {
      const int w = static_cast<int>(std::lround(spec.resize_factor * img.width));
      const int h = static_cast<int>(std::lround(spec.resize_factor * img.height));
      if (w < 2 || h < 2) throw Error(ErrorCode::CarrierTooSmall, "image too small to resize");
      // Quantize the downscaled copy as a real pipeline would store it.
      const Raster small = map_channels(img, [&](const Plane& p) { return resize_bilinear(p, w, h); });
      return map_channels(small, [&](const Plane& p) { return resize_bilinear(p, img.width, img.height); });
    }
  }
  return img;
}

std::vector<AttackSpec> attack_suite() {
  return {AttackSpec{AttackKind::None}, AttackSpec{AttackKind::GaussianBlur}, AttackSpec{AttackKind::Jpeg},
          AttackSpec{AttackKind::Resize}};
}

std::string attacked_dir_name(std::string_view base, AttackKind kind) {
  return std::string(base) + "_attacked_" + std::string(kind_name(kind));
}

}  // namespace wmtrace::attacks
