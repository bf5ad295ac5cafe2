#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pdgan/tensor.hpp"

namespace pdgan {

// "PDT1" binary tensor file: magic `PDT1`, u32-LE rank, rank x u32-LE dims,
// then product(dims) x f64-LE values.
void write_pdt1(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_pdt1(const std::filesystem::path& path);

// 8-bit binary PGM (P5); values are round(255 * v) with v clamped to [0,1].
void write_pgm(const std::filesystem::path& path, const std::vector<double>& values,
               int height, int width);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pdgan
