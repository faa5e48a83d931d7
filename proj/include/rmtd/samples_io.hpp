#pragma once

#include <string>

#include "rmtd/models.hpp"

namespace rmtd {

// Reads a complex sample matrix from CSV: one row per antenna, each row 2N
// decimal floats as interleaved (real, imaginary) pairs; an optional header
// line is detected by a non-numeric first token. Ragged rows, odd field
// counts and non-numeric fields raise std::runtime_error naming the line.
ComplexMatrix read_samples_csv(const std::string& path);

// Writes the matching CSV (no header), 17 significant digits, so that a
// write/read round-trip reproduces the matrix bit for bit.
void write_samples_csv(const ComplexMatrix& X, const std::string& path);

}  // namespace rmtd
