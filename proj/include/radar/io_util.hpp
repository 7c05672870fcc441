#pragma once

#include <string>
#include <vector>

#include "radar/tensor.hpp"

namespace radar {

// Shortest round-trippable decimal form ("%.17g"), used by every CSV writer
// so reruns produce byte-identical files.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Single-tensor binary container ("RDT1", rank u8, dims u32 LE, values f64
// LE); used for adversarial batch dumps.
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace radar
