#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>

#include "mpf/core/error.hpp"

namespace mpf::backbone {

// Branch widths of one 3D CA-Inception module: 1x1x1, 1x1x1->3x3x3 (twice),
// and 3x3x3-maxpool->1x1x1.
struct InceptionSpec {
  int b1;
  int b2_reduce, b2;
  int b3_reduce, b3;
  int b4;
  int out_channels() const { return b1 + b2 + b3 + b4; }
  bool operator==(const InceptionSpec&) const = default;
};

enum class OutputMode { embedding, feature_map };
enum class InitScheme { fan_in_scaled, unit_normal };

const char* output_mode_name(OutputMode m);
OutputMode output_mode_from_name(const std::string& s);
const char* init_scheme_name(InitScheme s);
InitScheme init_scheme_from_name(const std::string& s);

struct BackboneConfig {
  int in_channels = 5;
  int stem_channels = 64;
  InceptionSpec inception_a{64, 96, 128, 16, 32, 32};   // GoogLeNet 3a widths
  InceptionSpec inception_b{128, 128, 192, 32, 96, 64}; // GoogLeNet 3b widths
  int ca_reduction = 16;
  int embedding_dim = 256;
  int input_t = 10;
  int input_h = 128;
  int input_w = 128;
  OutputMode output_mode = OutputMode::embedding;
  InitScheme init_scheme = InitScheme::fan_in_scaled;
  uint64_t seed = 1;

  int ca_mid(int channels) const { return std::max(8, channels / ca_reduction); }

  // stem stride (1,2,2) plus two (1,2,2) pools: spatial /8, time preserved
  std::array<int, 4> feature_map_dims() const {
    return {inception_b.out_channels(), input_t, input_h / 8, input_w / 8};
  }

  int flat_dim() const {
    auto d = feature_map_dims();
    return d[0] * d[1] * d[2] * d[3];
  }

  void validate() const {
    check(in_channels >= 1 && stem_channels >= 1, "backbone config: channel counts must be >= 1");
    check(ca_reduction >= 1, "backbone config: ca_reduction must be >= 1");
    check(output_mode == OutputMode::feature_map || embedding_dim >= 8,
          "backbone config: embedding_dim must be >= 8");
    check(input_t >= 1, "backbone config: input_t must be >= 1");
    check(input_h % 8 == 0 && input_w % 8 == 0 && input_h >= 8 && input_w >= 8,
          "backbone config: input H and W must be divisible by 8");
    for (const InceptionSpec* s : {&inception_a, &inception_b})
      check(s->b1 >= 1 && s->b2_reduce >= 1 && s->b2 >= 1 && s->b3_reduce >= 1 && s->b3 >= 1 &&
                s->b4 >= 1,
            "backbone config: inception branch widths must be >= 1");
  }

  bool operator==(const BackboneConfig&) const = default;
};

}  // namespace mpf::backbone
