#ifndef NICHOLSON_NICHOLSON_HPP
#define NICHOLSON_NICHOLSON_HPP

#include "nicholson/attractor.hpp"
#include "nicholson/dde.hpp"
#include "nicholson/errors.hpp"
#include "nicholson/model.hpp"
#include "nicholson/model_io.hpp"
#include "nicholson/report_io.hpp"
#include "nicholson/spectral.hpp"
#include "nicholson/torus.hpp"

namespace nicholson {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nicholson

#endif  // NICHOLSON_NICHOLSON_HPP
