// SPDX-License-Identifier: Apache-2.0

// Canonical JSON forms. Keys are emitted in a fixed order and numbers in their
// shortest round-trip form, so dump(to_json(x)) is byte-stable.

#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "mrcad/cad.hpp"
#include "mrcad/game.hpp"
#include "mrcad/message.hpp"

namespace mrcad {

using Json = nlohmann::ordered_json;

Json to_json(Point p);
Json to_json(const Curve& c);
/// {"curves": [{"type": ..., "control_points": [[x, y], ...]}, ...]}
Json to_json(const Design& d);
/// {"name": ..., "arguments": {...}}
Json to_json(const Action& a);
/// {"text": ..., "strokes": [[[x, y], ...], ...]}
Json to_json(const Message& m);
Json to_json(const Round& r);
Json to_json(const Rollout& r);

// Parsers throw Error(SchemaError) naming the offending location (a JSON
// pointer relative to the value passed in), or the cad-core error when the
// content is well-formed but geometrically invalid.
Point point_from_json(const Json& j, const std::string& where = "");
Curve curve_from_json(const Json& j, const std::string& where = "");
Design design_from_json(const Json& j, const std::string& where = "");
Action action_from_json(const Json& j, const std::string& where = "");
Message message_from_json(const Json& j, const std::string& where = "");
Round round_from_json(const Json& j, const std::string& where = "");
Rollout rollout_from_json(const Json& j, const std::string& where = "");

/// Compact canonical text.
std::string dump(const Json& j);
/// Parses text, mapping syntax errors to SchemaError.
Json parse_json(std::string_view text, const std::string& where = "");

}  // namespace mrcad
