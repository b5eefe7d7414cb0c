#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "wmtrace/signal.hpp"

namespace wmtrace::attacks {

enum class AttackKind { None, GaussianBlur, Jpeg, Resize };

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double blur_sigma = 0.5;
  int jpeg_quality = 50;
  double resize_factor = 0.8;

  void validate() const;
  bool operator==(const AttackSpec&) const = default;
};

std::string_view kind_name(AttackKind kind);  // none, gaussian_blur, jpeg, resize
AttackKind parse_kind(std::string_view name);

// Separable Gaussian, radius ceil(3 sigma), normalized weights, edges clamped.
Plane gaussian_blur(const Plane& plane, double sigma);
// Bilinear resampling with pixel-centre alignment.
Plane resize_bilinear(const Plane& plane, int width, int height);

Raster apply_attack(const Raster& img, const AttackSpec& spec);

// [none, gaussian_blur(0.5), jpeg(50), resize(0.8)]
std::vector<AttackSpec> attack_suite();

// "<base>_attacked_<kind>", the directory used for attacked copies of `base`.
std::string attacked_dir_name(std::string_view base, AttackKind kind);

}  // namespace wmtrace::attacks
