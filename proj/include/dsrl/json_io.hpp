#pragma once

#include <json.hpp>

#include "dsrl/task.hpp"

namespace dsrl {

nlohmann::json task_to_json(const TaskInstance& task);

// `where` prefixes error messages, e.g. "line 3".
TaskInstance task_from_json(const nlohmann::json& obj, const Vocabulary& vocab,
                            const std::string& where);

TokenSeq tokens_from_json(const nlohmann::json& obj, const char* field, const Vocabulary& vocab,
                          const std::string& where);

}  // namespace dsrl
