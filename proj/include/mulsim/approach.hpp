#pragma once

#include <string>

namespace mulsim {

// The five offloading strategies under study.
//   kA1  raw-data upload, all compute on the server
//   kA2  fully on-device unimodal inference, fused from tiny result messages
//   kA3  latent upload, multimodal cross attention on the server
//   kA4  on-device inference plus conformal sets, fused at the user device
//   kA5  adaptive: A4 for simple samples, fall back to A3-style latents
enum class Approach { kA1, kA2, kA3, kA4, kA5 };

const char* approach_name(Approach a);
Approach parse_approach(const std::string& text);  // "A1".."A5" or "a1".."a5"

}  // namespace mulsim
