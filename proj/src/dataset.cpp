#include "rspmn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rspmn/serialize.hpp"

namespace rspmn {

using nlohmann::json;

VarId SequenceDataset::utility_var() const {
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variables[i].kind == VarKind::Utility) return static_cast<VarId>(i);
    throw std::runtime_error("dataset: no utility variable");
}

std::size_t SequenceDataset::max_episode_length() const {
    std::size_t m = 0;
    for (const Episode& e : episodes) m = std::max(m, e.size());
    return m;
}

std::vector<VariableMeta> two_step_variables(const std::vector<VariableMeta>& one_step) {
    std::vector<VariableMeta> vars;
    vars.reserve(one_step.size() * 2);
    for (int step = 0; step < 2; ++step) {
        for (const VariableMeta& v : one_step) {
            VariableMeta copy = v;
            copy.name = v.name + "@" + std::to_string(step);
            vars.push_back(std::move(copy));
        }
    }
    return vars;
}

PartialOrder two_step_order(const PartialOrder& one_step, int one_step_var_count) {
    PartialOrder order;
    for (int step = 0; step < 2; ++step) {
        const VarId offset = step * one_step_var_count;
        for (const Slot& slot : one_step.slots) {
            Slot copy = slot;
            if (copy.is_decision) {
                copy.decision_var += offset;
            } else {
                for (VarId& v : copy.info_vars) v += offset;
            }
            order.slots.push_back(std::move(copy));
        }
    }
    return order;
}

namespace {

// Exact codes for few distinct values; quantile buckets beyond the cap, with
// each bucket represented by the median of the values it absorbed.
std::vector<double> bucketize_utilities(const std::vector<double>& raw, int max_buckets,
                                        std::vector<int>& codes) {
    std::vector<double> sorted = raw;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<double> reps;
    if (static_cast<int>(sorted.size()) <= max_buckets) {
        reps = sorted;
    } else {
        std::vector<double> all = raw;
        std::sort(all.begin(), all.end());
        reps.reserve(static_cast<std::size_t>(max_buckets));
        for (int b = 0; b < max_buckets; ++b) {
            const std::size_t lo = all.size() * static_cast<std::size_t>(b) / static_cast<std::size_t>(max_buckets);
            const std::size_t hi = all.size() * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(max_buckets);
            if (lo >= hi) continue;
            reps.push_back(all[(lo + hi) / 2]);
        }
        std::sort(reps.begin(), reps.end());
        reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
    }

    codes.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto it = std::lower_bound(reps.begin(), reps.end(), raw[i]);
        std::size_t idx;
        if (it == reps.end()) {
            idx = reps.size() - 1;
        } else if (it == reps.begin()) {
            idx = 0;
        } else {
            // nearest representative
            idx = static_cast<std::size_t>(it - reps.begin());
            if (raw[i] - *(it - 1) <= *it - raw[i]) --idx;
        }
        codes[i] = static_cast<int>(idx);
    }
    return reps;
}

}  // namespace

TwoStepTable wrap_two_step(const SequenceDataset& data, int max_utility_buckets) {
    TwoStepTable table;
    const int one = static_cast<int>(data.variables.size());
    table.variables = two_step_variables(data.variables);
    table.order = two_step_order(data.partial_order, one);
    table.columns.assign(static_cast<std::size_t>(2 * one), {});
    table.utility_values.assign(static_cast<std::size_t>(2 * one), {});

    const VarId uvar = data.utility_var();
    std::vector<double> raw_utilities[2];
    for (const Episode& episode : data.episodes) {
        if (episode.size() < 2) {
            if (!episode.empty()) ++table.skipped_short_episodes;
            continue;
        }
        for (std::size_t t = 0; t + 1 < episode.size(); ++t) {
            for (int half = 0; half < 2; ++half) {
                const StepTuple& tup = episode[t + static_cast<std::size_t>(half)];
                int value_idx = 0;
                for (int v = 0; v < one; ++v) {
                    const VarId col = static_cast<VarId>(half * one + v);
                    if (v == uvar) {
                        raw_utilities[half].push_back(tup.utility);
                        table.columns[static_cast<std::size_t>(col)].push_back(0);  // patched below
                    } else {
                        table.columns[static_cast<std::size_t>(col)].push_back(tup.values.at(
                            static_cast<std::size_t>(value_idx)));
                        ++value_idx;
                    }
                }
            }
            ++table.rows;
        }
    }

    for (int half = 0; half < 2; ++half) {
        const VarId col = static_cast<VarId>(half * one + uvar);
        std::vector<int> codes;
        table.utility_values[static_cast<std::size_t>(col)] =
            bucketize_utilities(raw_utilities[half], max_utility_buckets, codes);
        table.columns[static_cast<std::size_t>(col)] = std::move(codes);
    }
    return table;
}

void save_dataset_csv(const SequenceDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    out << "episode,step";
    for (const VariableMeta& v : data.variables)
        if (v.kind != VarKind::Utility) out << "," << v.name;
    const VarId uvar = data.utility_var();
    out << "," << data.variables[static_cast<std::size_t>(uvar)].name << "\n";
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        for (std::size_t t = 0; t < data.episodes[e].size(); ++t) {
            const StepTuple& tup = data.episodes[e][t];
            out << e << "," << t;
            for (int value : tup.values) out << "," << value;
            out << "," << format_double(tup.utility) << "\n";
        }
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

}  // namespace

void save_order_file(const SequenceDataset& data, const std::string& path) {
    json arr = json::array();
    for (const Slot& slot : data.partial_order.slots) {
        json rec;
        if (slot.is_decision) {
            rec["decision"] = data.variables.at(static_cast<std::size_t>(slot.decision_var)).name;
        } else {
            json names = json::array();
            for (VarId v : slot.info_vars) names.push_back(data.variables.at(static_cast<std::size_t>(v)).name);
            rec["info"] = std::move(names);
        }
        arr.push_back(std::move(rec));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write order file: " + path);
    out << arr.dump(2) << "\n";
}

SequenceDataset load_dataset(const std::string& csv_path, const std::string& order_path) {
    std::ifstream order_in(order_path);
    if (!order_in) throw std::runtime_error("cannot read order file: " + order_path);
    json order_json;
    order_in >> order_json;

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot read dataset: " + csv_path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("dataset: empty file");
    std::vector<std::string> columns = split_csv_line(header);
    if (columns.size() < 4 || columns[0] != "episode" || columns[1] != "step")
        throw std::runtime_error("dataset: header must start with episode,step");
    const std::vector<std::string> var_names(columns.begin() + 2, columns.end());

    std::map<std::string, VarKind> kinds;
    for (const json& rec : order_json) {
        if (rec.contains("decision")) {
            kinds[rec["decision"].get<std::string>()] = VarKind::Decision;
        } else {
            for (const json& name : rec.at("info")) kinds[name.get<std::string>()] = VarKind::State;
        }
    }

    SequenceDataset data;
    int utility_count = 0;
    for (std::size_t i = 0; i < var_names.size(); ++i) {
        VariableMeta v;
        v.name = var_names[i];
        auto it = kinds.find(v.name);
        v.kind = (it == kinds.end()) ? VarKind::Utility : it->second;
        if (v.kind == VarKind::Utility) ++utility_count;
        data.variables.push_back(std::move(v));
    }
    if (utility_count != 1)
        throw std::runtime_error("dataset: expected exactly one utility column, found " +
                                 std::to_string(utility_count));

    auto var_index = [&](const std::string& name) -> VarId {
        for (std::size_t i = 0; i < data.variables.size(); ++i)
            if (data.variables[i].name == name) return static_cast<VarId>(i);
        throw std::runtime_error("order file names unknown column '" + name + "'");
    };
    int slot_idx = 0;
    for (const json& rec : order_json) {
        Slot slot;
        if (rec.contains("decision")) {
            slot.is_decision = true;
            slot.decision_var = var_index(rec["decision"].get<std::string>());
            data.variables[static_cast<std::size_t>(slot.decision_var)].slot = slot_idx;
        } else {
            for (const json& name : rec.at("info")) {
                const VarId v = var_index(name.get<std::string>());
                slot.info_vars.push_back(v);
                data.variables[static_cast<std::size_t>(v)].slot = slot_idx;
            }
        }
        data.partial_order.slots.push_back(std::move(slot));
        ++slot_idx;
    }

    const VarId uvar = data.utility_var();
    std::string line;
    long last_episode = -1;
    long last_step = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != columns.size())
            throw std::runtime_error("dataset: row with wrong column count: " + line);
        const long episode = std::stol(fields[0]);
        const long step = std::stol(fields[1]);
        if (episode < last_episode || (episode == last_episode && step != last_step + 1))
            throw std::runtime_error("dataset: rows must be sorted by (episode, step)");
        if (episode != last_episode && step != 0)
            throw std::runtime_error("dataset: each episode must start at step 0");
        while (static_cast<long>(data.episodes.size()) <= episode) data.episodes.emplace_back();
        StepTuple tup;
        for (std::size_t i = 0; i < var_names.size(); ++i) {
            const std::string& field = fields[i + 2];
            if (static_cast<VarId>(i) == uvar) {
                tup.utility = parse_double(field);
            } else {
                tup.values.push_back(std::stoi(field));
            }
        }
        data.episodes[static_cast<std::size_t>(episode)].push_back(std::move(tup));
        last_episode = episode;
        last_step = step;
    }

    // Cardinalities from the data.
    std::vector<int> max_value(data.variables.size(), 1);
    for (const Episode& e : data.episodes) {
        for (const StepTuple& tup : e) {
            int idx = 0;
            for (std::size_t v = 0; v < data.variables.size(); ++v) {
                if (static_cast<VarId>(v) == uvar) continue;
                if (tup.values[static_cast<std::size_t>(idx)] < 0)
                    throw std::runtime_error("dataset: negative categorical value");
                max_value[v] = std::max(max_value[v], tup.values[static_cast<std::size_t>(idx)]);
                ++idx;
            }
        }
    }
    for (std::size_t v = 0; v < data.variables.size(); ++v)
        if (data.variables[v].kind != VarKind::Utility)
            data.variables[v].cardinality = max_value[v] + 1;
    return data;
}

}  // namespace rspmn
