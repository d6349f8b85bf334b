#ifndef TRUSTNET_FORMAT_HPP
#define TRUSTNET_FORMAT_HPP

#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <system_error>

namespace trustnet {

/// Shortest decimal string that round-trips the double exactly.
/// Keeps emitted files byte-stable across platforms and locales.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline std::string format_long(long v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw std::runtime_error("format_long: conversion failed");
  return std::string(buf, res.ptr);
}

/// Exact inverse of format_double. from_chars rather than stod: stod throws
/// on subnormal inputs (glibc reports them as ERANGE), which format_double
/// legitimately emits.
inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("parse_double: bad number: " + s);
  return v;
}

} // namespace trustnet

#endif
