#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navgym/worldmap.hpp"

namespace navgym {

class SvgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace svg_detail {

struct Element {
  std::string name;
  std::map<std::string, std::string> attrs;
  bool self_closing = false;
  bool closing = false;
};

// Pull tokenizer over the tag structure; character data is skipped.
class TagReader {
 public:
  explicit TagReader(std::string_view text) : s_(text) {}

  bool next(Element& out) {
    while (true) {
      const auto lt = s_.find('<', pos_);
      if (lt == std::string_view::npos) return false;
      pos_ = lt;
      if (starts_with("<!--")) {
        skip_past("-->", "unterminated comment");
      } else if (starts_with("<![CDATA[")) {
        skip_past("]]>", "unterminated CDATA section");
      } else if (starts_with("<?")) {
        skip_past("?>", "unterminated processing instruction");
      } else if (starts_with("<!")) {
        skip_past(">", "unterminated declaration");
      } else {
        out = read_tag();
        return true;
      }
    }
  }

 private:
  bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

  void skip_past(std::string_view end, const char* err) {
    const auto e = s_.find(end, pos_);
    if (e == std::string_view::npos) throw SvgError(std::string("malformed SVG: ") + err);
    pos_ = e + end.size();
  }

  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == ':' || c == '-' || c == '_' || c == '.';
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::string read_name() {
    const auto start = pos_;
    while (pos_ < s_.size() && name_char(s_[pos_])) ++pos_;
    if (start == pos_) throw SvgError("malformed SVG: expected a name at offset " + std::to_string(start));
    return std::string(s_.substr(start, pos_ - start));
  }

  Element read_tag() {
    Element el;
    ++pos_;  // '<'
    if (pos_ < s_.size() && s_[pos_] == '/') {
      el.closing = true;
      ++pos_;
    }
    el.name = read_name();
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) throw SvgError("malformed SVG: unterminated <" + el.name + "> tag");
      const char c = s_[pos_];
      if (c == '>') {
        ++pos_;
        return el;
      }
      if (c == '/' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '>') {
        el.self_closing = true;
        pos_ += 2;
        return el;
      }
      if (el.closing) throw SvgError("malformed SVG: attributes on closing tag </" + el.name + ">");
      std::string key = read_name();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '=') throw SvgError("malformed SVG: attribute '" + key + "' lacks a value");
      ++pos_;
      skip_ws();
      if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\''))
        throw SvgError("malformed SVG: attribute '" + key + "' value must be quoted");
      const char q = s_[pos_++];
      const auto end = s_.find(q, pos_);
      if (end == std::string_view::npos) throw SvgError("malformed SVG: unterminated attribute '" + key + "'");
      el.attrs[key] = std::string(s_.substr(pos_, end - pos_));
      pos_ = end + 1;
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// Uniform scale followed by translation: p' = scale * p + offset.
struct Transform {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  Vec2 apply(Vec2 p) const { return {scale * p.x + tx, scale * p.y + ty}; }
  Transform then_inner(const Transform& inner) const {
    return {scale * inner.scale, scale * inner.tx + tx, scale * inner.ty + ty};
  }
};

inline std::vector<double> parse_number_list(std::string_view text, const std::string& what) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++i;
      continue;
    }
    double v = 0.0;
    const char* first = text.data() + i;
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
    if (ec != std::errc()) throw SvgError("malformed SVG: bad number list in " + what);
    i = static_cast<std::size_t>(ptr - text.data());
    out.push_back(v);
  }
  return out;
}

inline double parse_length(const Element& el, const std::string& key, std::optional<double> fallback = {}) {
  auto it = el.attrs.find(key);
  if (it == el.attrs.end()) {
    if (fallback) return *fallback;
    throw SvgError("malformed SVG: <" + el.name + "> missing attribute '" + key + "'");
  }
  std::string_view v = it->second;
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
  if (v.size() > 2 && v.substr(v.size() - 2) == "px") v.remove_suffix(2);
  double out = 0.0;
  const char* first = v.data();
  if (!v.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw SvgError("malformed SVG: <" + el.name + "> attribute '" + key + "' is not a pixel length: '" + it->second +
                   "'");
  return out;
}

inline Transform parse_transform(const Element& el) {
  auto it = el.attrs.find("transform");
  if (it == el.attrs.end()) return {};
  std::string_view t = it->second;
  Transform acc;
  std::size_t i = 0;
  while (i < t.size()) {
    while (i < t.size() && (std::isspace(static_cast<unsigned char>(t[i])) || t[i] == ',')) ++i;
    if (i >= t.size()) break;
    const auto open = t.find('(', i);
    const auto close = t.find(')', i);
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
      throw SvgError("malformed SVG: bad transform '" + it->second + "'");
    std::string fn(t.substr(i, open - i));
    fn.erase(std::remove_if(fn.begin(), fn.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
             fn.end());
    const auto args = parse_number_list(t.substr(open + 1, close - open - 1), "transform");
    Transform step;
    if (fn == "translate" && (args.size() == 1 || args.size() == 2)) {
      step.tx = args[0];
      step.ty = args.size() == 2 ? args[1] : 0.0;
    } else if (fn == "scale" && (args.size() == 1 || (args.size() == 2 && args[0] == args[1]))) {
      step.scale = args[0];
    } else {
      throw SvgError("unsupported transform '" + fn + "' on <" + el.name + "> (only translate and uniform scale)");
    }
    acc = acc.then_inner(step);
    i = close + 1;
  }
  return acc;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

enum class Layer { None, Spawn, Goal };

inline Layer layer_of(const Element& el, Layer parent) {
  if (el.name != "g") return parent;
  for (const char* key : {"inkscape:label", "id"}) {
    if (auto it = el.attrs.find(key); it != el.attrs.end()) {
      const auto v = lower(it->second);
      if (v == "spawn") return Layer::Spawn;
      if (v == "goal") return Layer::Goal;
    }
  }
  return parent;
}

}  // namespace svg_detail

/// Converts a hand-drawn SVG into a WorldMap. Pixel coordinates are divided
/// by `pixels_per_meter` and the y axis is flipped (SVG y-down, map y-up).
/// Supported drawing elements: line, polyline, polygon, rect, circle. Layers
/// (g elements) labelled "spawn" and "goal" hold rect/circle regions.
inline WorldMap convert_svg(std::string_view svg, double pixels_per_meter, std::string name = "svg_map") {
  using namespace svg_detail;
  if (!(pixels_per_meter > 0.0) || !std::isfinite(pixels_per_meter))
    throw SvgError("pixels_per_meter must be positive");

  // Elements whose whole subtree carries no geometry.
  static const std::set<std::string> ignored_subtrees = {"title", "desc", "metadata", "defs", "sodipodi:namedview",
                                                        "style"};
  static const std::set<std::string> supported = {"line", "polyline", "polygon", "rect", "circle", "g", "svg"};

  struct Frame {
    std::string name;
    Transform xf;
    Layer layer;
  };
  std::vector<Frame> stack;
  int ignore_depth = 0;
  bool seen_root = false;
  std::set<std::string> unsupported;
  std::optional<Rect> svg_box;

  WorldMap map;
  map.name = std::move(name);
  const double k = 1.0 / pixels_per_meter;
  auto to_map = [&](const Transform& xf, Vec2 p) {
    const Vec2 q = xf.apply(p);
    return Vec2{q.x * k + 0.0, -q.y * k + 0.0};
  };
  auto add_polyline = [&](const Transform& xf, const std::vector<Vec2>& pts, bool closed) {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i + 1 < n + (closed ? 1 : 0); ++i) {
      const Vec2 a = to_map(xf, pts[i]);
      const Vec2 b = to_map(xf, pts[(i + 1) % n]);
      if (!(a == b)) map.obstacles.emplace_back(Segment{a, b});
    }
  };

  TagReader reader(svg);
  Element el;
  while (reader.next(el)) {
    if (el.closing) {
      if (stack.empty() || stack.back().name != el.name)
        throw SvgError("malformed SVG: unexpected closing tag </" + el.name + ">");
      if (ignore_depth > 0) --ignore_depth;
      stack.pop_back();
      continue;
    }
    const Transform parent_xf = stack.empty() ? Transform{} : stack.back().xf;
    const Layer parent_layer = stack.empty() ? Layer::None : stack.back().layer;
    if (!seen_root) {
      if (el.name != "svg") throw SvgError("malformed SVG: root element must be <svg>, got <" + el.name + ">");
      seen_root = true;
      if (auto vb = el.attrs.find("viewBox"); vb != el.attrs.end()) {
        const auto v = parse_number_list(vb->second, "viewBox");
        if (v.size() != 4 || !(v[2] > 0) || !(v[3] > 0)) throw SvgError("malformed SVG: bad viewBox");
        svg_box = Rect{{v[0], v[1]}, {v[0] + v[2], v[1] + v[3]}};
      } else if (el.attrs.count("width") && el.attrs.count("height")) {
        svg_box = Rect{{0, 0}, {parse_length(el, "width"), parse_length(el, "height")}};
      }
    }
    const bool ignoring = ignore_depth > 0 || ignored_subtrees.count(el.name) > 0 ||
                          el.name.rfind("sodipodi:", 0) == 0 || el.name.rfind("inkscape:", 0) == 0;
    if (!el.self_closing) {
      const Transform xf = ignoring ? parent_xf : parent_xf.then_inner(parse_transform(el));
      stack.push_back({el.name, xf, layer_of(el, parent_layer)});
      if (ignoring) ++ignore_depth;
    }
    if (ignoring) continue;
    if (!supported.count(el.name)) {
      unsupported.insert(el.name);
      continue;
    }
    if (el.name == "g" || el.name == "svg") continue;

    const Transform xf = parent_xf.then_inner(parse_transform(el));
    const Layer layer = parent_layer;
    if (layer != Layer::None) {
      auto& regions = layer == Layer::Spawn ? map.spawn_regions : map.goal_regions;
      if (el.name == "rect") {
        const double x = parse_length(el, "x", 0.0), y = parse_length(el, "y", 0.0);
        const Vec2 a = to_map(xf, {x, y});
        const Vec2 b = to_map(xf, {x + parse_length(el, "width"), y + parse_length(el, "height")});
        regions.emplace_back(Rect{{std::min(a.x, b.x), std::min(a.y, b.y)}, {std::max(a.x, b.x), std::max(a.y, b.y)}});
      } else if (el.name == "circle") {
        const Vec2 c = to_map(xf, {parse_length(el, "cx", 0.0), parse_length(el, "cy", 0.0)});
        regions.emplace_back(Disk{c, parse_length(el, "r") * xf.scale * k});
      } else {
        throw SvgError("<" + el.name + "> is not allowed in a spawn/goal layer (use rect or circle)");
      }
      continue;
    }

    if (el.name == "line") {
      add_polyline(xf, {{parse_length(el, "x1", 0.0), parse_length(el, "y1", 0.0)},
                        {parse_length(el, "x2", 0.0), parse_length(el, "y2", 0.0)}},
                   false);
    } else if (el.name == "polyline" || el.name == "polygon") {
      auto it = el.attrs.find("points");
      if (it == el.attrs.end()) throw SvgError("malformed SVG: <" + el.name + "> missing 'points'");
      const auto v = parse_number_list(it->second, el.name + " points");
      if (v.size() % 2 != 0 || v.size() < 4) throw SvgError("malformed SVG: <" + el.name + "> needs coordinate pairs");
      std::vector<Vec2> pts;
      for (std::size_t i = 0; i < v.size(); i += 2) pts.push_back({v[i], v[i + 1]});
      add_polyline(xf, pts, el.name == "polygon");
    } else if (el.name == "rect") {
      if (parse_length(el, "rx", 0.0) != 0.0 || parse_length(el, "ry", 0.0) != 0.0)
        throw SvgError("rounded <rect> corners are not supported");
      const double x = parse_length(el, "x", 0.0), y = parse_length(el, "y", 0.0);
      const double w = parse_length(el, "width"), h = parse_length(el, "height");
      add_polyline(xf, {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}}, true);
    } else if (el.name == "circle") {
      const Vec2 c = to_map(xf, {parse_length(el, "cx", 0.0), parse_length(el, "cy", 0.0)});
      map.obstacles.emplace_back(Circle{c, parse_length(el, "r") * xf.scale * k});
    }
  }
  if (!seen_root) throw SvgError("malformed SVG: no <svg> element");
  if (!stack.empty()) throw SvgError("malformed SVG: unclosed <" + stack.back().name + ">");
  if (!unsupported.empty()) {
    std::string names;
    for (const auto& n : unsupported) names += (names.empty() ? "" : ", ") + n;
    throw SvgError("unsupported SVG element(s): " + names);
  }
  if (map.spawn_regions.empty()) throw SvgError("SVG has no 'spawn' layer with regions");
  if (map.goal_regions.empty()) throw SvgError("SVG has no 'goal' layer with regions");

  if (svg_box) {
    const Vec2 a = to_map({}, svg_box->min);
    const Vec2 b = to_map({}, svg_box->max);
    map.bounds = {{std::min(a.x, b.x), std::min(a.y, b.y)}, {std::max(a.x, b.x), std::max(a.y, b.y)}};
  } else {
    // No declared canvas: bounding box of everything drawn.
    Rect box{{1e300, 1e300}, {-1e300, -1e300}};
    auto grow = [&](Vec2 p, double r) {
      box.min = {std::min(box.min.x, p.x - r), std::min(box.min.y, p.y - r)};
      box.max = {std::max(box.max.x, p.x + r), std::max(box.max.y, p.y + r)};
    };
    for (const auto& o : map.obstacles) {
      if (const auto* s = std::get_if<Segment>(&o)) {
        grow(s->a, 0);
        grow(s->b, 0);
      } else {
        grow(std::get<Circle>(o).center, std::get<Circle>(o).radius);
      }
    }
    for (const auto* rs : {&map.spawn_regions, &map.goal_regions}) {
      for (const auto& r : *rs) {
        if (const auto* rect = std::get_if<Rect>(&r)) {
          grow(rect->min, 0);
          grow(rect->max, 0);
        } else {
          grow(std::get<Disk>(r).center, std::get<Disk>(r).radius);
        }
      }
    }
    map.bounds = box;
  }
  try {
    validate(map);
  } catch (const MapValidationError& e) {
    throw SvgError(std::string("converted map is invalid: ") + e.what());
  }
  return map;
}

}  // namespace navgym
