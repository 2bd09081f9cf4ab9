#pragma once

#include <stdexcept>
#include <string>

namespace morita {

/// Base class of every error thrown by this library.
struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

struct input_shape_error : error {
  explicit input_shape_error(const std::string& w) : error("input shape: " + w) {}
};

/// A Hermitian operator that must be invertible is numerically singular.
/// For Gram operators of conditional expectations this signals that the
/// expectation is not of index-finite type at the working tolerance.
struct near_singular_error : error {
  explicit near_singular_error(const std::string& w) : error("near singular: " + w) {}
};

struct non_stabilizing_error : error {
  explicit non_stabilizing_error(const std::string& w) : error("span does not stabilize: " + w) {}
};

struct not_subalgebra_error : error {
  explicit not_subalgebra_error(const std::string& w) : error("not a subalgebra: " + w) {}
};

struct degenerate_spectrum_error : error {
  explicit degenerate_spectrum_error(const std::string& w) : error("degenerate spectrum: " + w) {}
};

struct not_projection_error : error {
  explicit not_projection_error(const std::string& w) : error("not a projection: " + w) {}
};

struct not_full_error : error {
  explicit not_full_error(const std::string& w) : error("projection not full: " + w) {}
};

struct bad_projection_error : error {
  explicit bad_projection_error(const std::string& w) : error("bad projection: " + w) {}
};

struct inconsistent_span_error : error {
  explicit inconsistent_span_error(const std::string& w) : error("inconsistent spanning relations: " + w) {}
};

struct index_not_in_subalgebra_error : error {
  explicit index_not_in_subalgebra_error(const std::string& w)
      : error("index not in subalgebra: " + w) {}
};

struct star_condition_error : error {
  explicit star_condition_error(const std::string& w) : error("compression condition fails: " + w) {}
};

struct rank_deficient_error : error {
  explicit rank_deficient_error(const std::string& w) : error("rank deficient system: " + w) {}
};

struct frame_not_found_error : error {
  explicit frame_not_found_error(const std::string& w) : error("no finite frame: " + w) {}
};

struct axiom_violation_error : error {
  explicit axiom_violation_error(const std::string& w) : error("axiom violation: " + w) {}
};

struct size_cap_error : error {
  explicit size_cap_error(const std::string& w) : error("size cap exceeded: " + w) {}
};

struct parse_error : error {
  long line = 0, column = 0;
  parse_error(const std::string& w, long l, long c)
      : error("parse error at " + std::to_string(l) + ":" + std::to_string(c) + ": " + w),
        line(l), column(c) {}
};

struct io_error : error {
  explicit io_error(const std::string& w) : error("io: " + w) {}
};

}  // namespace morita
