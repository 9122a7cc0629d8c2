// SPDX-License-Identifier: Apache-2.0

// JSON forms of the configuration structs and the operator config file.
// Unknown keys are rejected with their JSON-pointer location.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mrcad/bridge.hpp"
#include "mrcad/game.hpp"
#include "mrcad/metric.hpp"
#include "mrcad/render.hpp"
#include "mrcad/serialize.hpp"

namespace mrcad {

Json to_json(const MetricConfig& m);
MetricConfig metric_config_from_json(const Json& j, const std::string& where = "");

/// An unlimited clock or per-turn limit is written as null.
Json to_json(const GameConfig& g);
/// Starts from {"preset": name} when given (default "custom"), then applies
/// the remaining keys.
GameConfig game_config_from_json(const Json& j, const std::string& where = "");

Json to_json(const RenderStyle& s);
RenderStyle render_style_from_json(const Json& j, const std::string& where = "");

/// Never contains a credential, only the name of the variable holding it.
Json to_json(const EndpointConfig& e);
/// {"preset": "open_weights"} selects the open-weights sampling defaults.
EndpointConfig endpoint_config_from_json(const Json& j, const std::string& where = "");

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "mrcad-data";
  /// Optional designs file used as the target pool.
  std::optional<std::filesystem::path> targets;
  double heartbeat = 5.0;
  double disconnect_grace = 60.0;
  bool reveal_distance = true;
};

struct GlobalConfig {
  MetricConfig metric;
  RenderStyle render;
  int image_size = 512;
  GameConfig game = condition_preset("dataset");
  EndpointConfig endpoint;
  ServerConfig server;
  std::uint64_t seed = 0;
};

/// Throws InvalidConfig naming the offending location.
GlobalConfig global_config_from_json(const Json& j);
GlobalConfig load_config(const std::filesystem::path& path);
Json to_json(const GlobalConfig& c);

}  // namespace mrcad
