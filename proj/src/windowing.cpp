#include "uld/windowing.hpp"

#include <algorithm>
#include <fstream>

#include "uld/errors.hpp"
#include "uld/text.hpp"

namespace uld::windowing {

namespace {

void check_width(const HuWindow& w) {
  if (!(w.width > 0.0)) {
    throw Error(ErrorCode::kNonPositiveWidth, "window width must be positive, got " +
                                                  text::format_double(w.width));
  }
}

}  // namespace

double window_value(double hu, const HuWindow& w) noexcept {
  const double t = (hu - w.low()) / w.width;
  return std::clamp(t, 0.0, 1.0) * 255.0;
}

Image apply_window(const Image& slice, const HuWindow& w) {
  check_width(w);
  Image out(slice.rows(), slice.cols());
  std::transform(slice.data().begin(), slice.data().end(), out.data().begin(),
                 [&w](double hu) { return window_value(hu, w); });
  return out;
}

WindowSet default_window_set() {
  return {{400.0, 2000.0}, {-600.0, 1500.0}, {50.0, 350.0}, {30.0, 150.0}, {50.0, 400.0}};
}

Image IntensityStack::view_channel(std::size_t v, std::size_t c) const {
  const auto plane = rows * cols;
  const auto begin = data.begin() + static_cast<std::ptrdiff_t>((v * channels + c) * plane);
  return Image(rows, cols, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(plane)));
}

IntensityStack multi_intensity_stack(std::span<const Image> slices, const WindowSet& windows) {
  if (windows.empty()) throw Error(ErrorCode::kEmptyConfig, "window set is empty");
  if (slices.empty()) throw Error(ErrorCode::kShapeMismatch, "no slices given");
  for (const auto& s : slices) {
    if (s.rows() != slices[0].rows() || s.cols() != slices[0].cols()) {
      throw Error(ErrorCode::kShapeMismatch, "context slices differ in shape");
    }
  }
  for (const auto& w : windows) check_width(w);

  IntensityStack stack{windows.size(), slices.size(), slices[0].rows(), slices[0].cols(), {}};
  const auto plane = stack.rows * stack.cols;
  stack.data.resize(stack.views * stack.channels * plane);
  auto out = stack.data.begin();
  for (const auto& w : windows) {
    for (const auto& s : slices) {
      out = std::transform(s.data().begin(), s.data().end(), out,
                           [&w](double hu) { return window_value(hu, w); });
    }
  }
  return stack;
}

HuWindow parse_window(const std::string& level_comma_width) {
  auto values = text::parse_double_list(level_comma_width, ',');
  if (!values || values->size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "window must be 'level,width': " + level_comma_width);
  }
  HuWindow w{(*values)[0], (*values)[1]};
  check_width(w);
  return w;
}

WindowSet parse_window_set(std::istream& in) {
  WindowSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    try {
      set.push_back(parse_window(std::string(body)));
    } catch (const Error& e) {
      throw ParseError(e.code(), line_no, 0, e.what());
    }
  }
  if (set.empty()) throw Error(ErrorCode::kEmptyConfig, "window file lists no windows");
  return set;
}

WindowSet load_window_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_window_set(in);
}

}  // namespace uld::windowing
