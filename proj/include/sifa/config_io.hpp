#pragma once

#include <json.hpp>

#include "sifa/domain.hpp"
#include "sifa/networks.hpp"
#include "sifa/preprocess.hpp"
#include "sifa/synthetic.hpp"
#include "sifa/trainer.hpp"

namespace sifa {

// JSON forms of the configuration structs. Readers start from the defaults,
// accept partial objects and reject unknown keys with InvalidArgument.

nlohmann::json to_json(const ArchConfig& c);
ArchConfig arch_from_json(const nlohmann::json& j, ArchConfig base = {});

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j, LossWeights base = {});

nlohmann::json to_json(const AugmentConfig& c);
AugmentConfig augment_from_json(const nlohmann::json& j, AugmentConfig base = {});

nlohmann::json to_json(const PreprocessConfig& c);
PreprocessConfig preprocess_from_json(const nlohmann::json& j, PreprocessConfig base = {});

nlohmann::json to_json(const SyntheticConfig& c);
SyntheticConfig synthetic_from_json(const nlohmann::json& j, SyntheticConfig base = {});

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const LossRecord& r);
LossRecord loss_record_from_json(const nlohmann::json& j);

}  // namespace sifa
