// SPDX-License-Identifier: Apache-2.0

#include "mrcad/message.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "mrcad/error.hpp"
#include "mrcad/format.hpp"

namespace mrcad {

void validate_drawing(const Drawing& drawing) {
  for (std::size_t i = 0; i < drawing.strokes.size(); ++i) {
    const auto& s = drawing.strokes[i];
    if (s.points.size() < 2) {
      throw Error(ErrorCode::InvalidDesign, "stroke " + std::to_string(i) + " has fewer than two points");
    }
    for (const auto& p : s.points) {
      if (!is_finite(p)) throw Error(ErrorCode::InvalidDesign, "stroke " + std::to_string(i) + " has a non-finite point");
    }
  }
}

bool Message::has_text() const {
  return std::any_of(text.begin(), text.end(), [](unsigned char c) { return !std::isspace(c); });
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::text_only:
      return "text_only";
    case Modality::drawing_only:
      return "drawing_only";
    case Modality::multimodal:
      return "multimodal";
    case Modality::empty:
      return "empty";
  }
  return "?";
}

Modality message_modality(const Message& m) {
  const bool t = m.has_text();
  const bool d = m.has_drawing();
  if (t && d) return Modality::multimodal;
  if (t) return Modality::text_only;
  if (d) return Modality::drawing_only;
  return Modality::empty;
}

std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::none:
      return "none";
    case AblationMode::drop_text:
      return "drop_text";
    case AblationMode::drop_drawing:
      return "drop_drawing";
  }
  return "?";
}

AblationMode ablation_from_string(std::string_view name) {
  if (name == "none" || name.empty()) return AblationMode::none;
  if (name == "text" || name == "drop_text") return AblationMode::drop_text;
  if (name == "drawing" || name == "drop_drawing") return AblationMode::drop_drawing;
  throw Error(ErrorCode::InvalidConfig, "unknown ablation '" + std::string(name) + "'");
}

Message ablate(Message m, AblationMode mode) {
  switch (mode) {
    case AblationMode::none:
      break;
    case AblationMode::drop_text:
      m.text.clear();
      break;
    case AblationMode::drop_drawing:
      m.drawing.strokes.clear();
      break;
  }
  return m;
}

StrokeStats stroke_stats(const Drawing& d) {
  StrokeStats s;
  s.stroke_count = d.strokes.size();
  for (const auto& stroke : d.strokes) {
    for (std::size_t i = 1; i < stroke.points.size(); ++i) s.ink += distance(stroke.points[i - 1], stroke.points[i]);
  }
  return s;
}

std::string drawing_to_svg(const Drawing& d, const Viewport& vp, const StrokeStyle& style) {
  std::ostringstream os;
  os << "<g class=\"drawing\">";
  for (const auto& stroke : d.strokes) {
    os << "<path d=\"";
    for (std::size_t i = 0; i < stroke.points.size(); ++i) {
      const Point v = vp.to_view(stroke.points[i]);
      os << (i == 0 ? "M " : " L ") << format_number(v.x) << ' ' << format_number(v.y);
    }
    os << "\" fill=\"none\" stroke=\"" << style.color << "\" stroke-width=\"" << format_number(style.width)
       << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>";
  }
  os << "</g>";
  return os.str();
}

namespace {

class PathDataParser {
 public:
  PathDataParser(std::string_view data, std::size_t base, const Viewport& vp) : data_(data), base_(base), vp_(vp) {}

  void parse(Drawing& out) {
    char command = 0;
    Stroke current;
    const auto flush = [&] {
      if (current.points.empty()) return;
      if (current.points.size() < 2) fail(pos_, "stroke with a single point");
      out.strokes.push_back(std::move(current));
      current = {};
    };
    skip_separators();
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) != 0) {
        if (c != 'M' && c != 'L') {
          throw Error(ErrorCode::UnsupportedCommand, std::string("path command '") + c + "' at byte " +
                                                         std::to_string(base_ + pos_) + " is outside the M/L subset");
        }
        command = c;
        ++pos_;
        if (command == 'M') flush();
        skip_separators();
        continue;
      }
      if (command == 0) fail(pos_, "path data must start with a command");
      const double x = number();
      skip_separators();
      const double y = number();
      skip_separators();
      current.points.push_back(vp_.to_canvas({x, y}));
      if (command == 'M' && current.points.size() == 1) command = 'L';  // implicit lineto
    }
    flush();
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& why) const {
    throw Error(ErrorCode::ParseError, why + " at byte " + std::to_string(base_ + at));
  }

  void skip_separators() {
    while (pos_ < data_.size() && (std::isspace(static_cast<unsigned char>(data_[pos_])) != 0 || data_[pos_] == ',')) {
      ++pos_;
    }
  }

  double number() {
    if (pos_ >= data_.size()) fail(pos_, "expected a coordinate");
    double v = 0.0;
    const char* begin = data_.data() + pos_;
    const char* end = data_.data() + data_.size();
    const char* start = begin;
    if (*start == '+') ++start;  // from_chars rejects a leading plus
    const auto [ptr, ec] = std::from_chars(start, end, v);
    if (ec != std::errc() || ptr == start) fail(pos_, "malformed coordinate");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  std::string_view data_;
  std::size_t base_;
  const Viewport& vp_;
  std::size_t pos_ = 0;
};

}  // namespace

Drawing svg_to_drawing(std::string_view svg, const Viewport& vp) {
  Drawing out;
  const auto first = svg.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return out;
  if (svg[first] != '<') {
    PathDataParser(svg, 0, vp).parse(out);
    validate_drawing(out);
    return out;
  }
  std::size_t pos = 0;
  while ((pos = svg.find("<path", pos)) != std::string_view::npos) {
    const std::size_t close = svg.find('>', pos);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "unterminated <path> element at byte " + std::to_string(pos));
    }
    const std::string_view element = svg.substr(pos, close - pos);
    std::size_t attr = element.find(" d=");
    if (attr == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "<path> without d attribute at byte " + std::to_string(pos));
    }
    attr += 3;
    if (attr >= element.size() || (element[attr] != '"' && element[attr] != '\'')) {
      throw Error(ErrorCode::ParseError, "unquoted d attribute at byte " + std::to_string(pos + attr));
    }
    const char quote = element[attr];
    const std::size_t value_begin = attr + 1;
    const std::size_t value_end = element.find(quote, value_begin);
    if (value_end == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "unterminated d attribute at byte " + std::to_string(pos + attr));
    }
    PathDataParser(element.substr(value_begin, value_end - value_begin), pos + value_begin, vp).parse(out);
    pos = close;
  }
  validate_drawing(out);
  return out;
}

std::size_t utf8_length(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace mrcad
