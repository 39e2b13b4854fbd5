#pragma once

#include <string>

#include "rspmn/network.hpp"

namespace rspmn {

// Model files are JSON with every weight, probability, and utility constant
// rendered as decimal text at 17 significant digits, so a round trip
// reproduces the doubles bit-exactly.
std::string serialize_model(const RspmnModel& model);
RspmnModel deserialize_model(const std::string& text);

void save_model(const RspmnModel& model, const std::string& path);
RspmnModel load_model(const std::string& path);

std::string format_double(double v);   // %.17g
double parse_double(const std::string& s);

}  // namespace rspmn
