#include "rspmn/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "rspmn/validity.hpp"

namespace rspmn {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::runtime_error("model file: bad decimal value '" + s + "'");
    return v;
}

namespace {

constexpr int kModelVersion = 1;

const char* kind_name(NodeType t) {
    switch (t) {
        case NodeType::Sum: return "sum";
        case NodeType::Product: return "product";
        case NodeType::Max: return "max";
        case NodeType::CategoricalLeaf: return "categorical";
        case NodeType::UtilityLeaf: return "utility";
        case NodeType::LatentInterface: return "latent";
    }
    return "?";
}

NodeType kind_from_name(const std::string& s) {
    if (s == "sum") return NodeType::Sum;
    if (s == "product") return NodeType::Product;
    if (s == "max") return NodeType::Max;
    if (s == "categorical") return NodeType::CategoricalLeaf;
    if (s == "utility") return NodeType::UtilityLeaf;
    if (s == "latent") return NodeType::LatentInterface;
    throw std::runtime_error("model file: unknown node kind '" + s + "'");
}

json nodes_to_json(const Network& net) {
    json arr = json::array();
    for (NodeId id = 0; id < static_cast<NodeId>(net.nodes.size()); ++id) {
        const Node& node = net.at(id);
        json rec;
        rec["id"] = id;
        rec["kind"] = kind_name(node.type);
        if (!node.children.empty()) rec["children"] = node.children;
        if (node.type == NodeType::Sum) {
            json w = json::array();
            for (double x : node.weights) w.push_back(format_double(x));
            rec["weights"] = std::move(w);
        }
        if (node.type == NodeType::Max) {
            rec["var"] = node.var;
            rec["labels"] = node.edge_labels;
        }
        if (node.type == NodeType::CategoricalLeaf) {
            rec["var"] = node.var;
            json p = json::array();
            for (double x : node.probs) p.push_back(format_double(x));
            rec["probs"] = std::move(p);
        }
        if (node.type == NodeType::UtilityLeaf) {
            rec["var"] = node.var;
            rec["value"] = format_double(node.value);
        }
        if (node.type == NodeType::LatentInterface) rec["interface_index"] = node.interface_index;
        arr.push_back(std::move(rec));
    }
    return arr;
}

Network nodes_from_json(const json& arr, int num_vars) {
    Network net;
    net.num_vars = num_vars;
    net.nodes.resize(arr.size());
    for (const json& rec : arr) {
        const NodeId id = rec.at("id").get<NodeId>();
        if (id < 0 || static_cast<std::size_t>(id) >= net.nodes.size())
            throw std::runtime_error("model file: node id out of range");
        Node node;
        node.type = kind_from_name(rec.at("kind").get<std::string>());
        if (rec.contains("children")) node.children = rec["children"].get<std::vector<NodeId>>();
        if (node.type == NodeType::Sum) {
            for (const json& w : rec.at("weights")) node.weights.push_back(parse_double(w.get<std::string>()));
            if (node.weights.size() != node.children.size())
                throw std::runtime_error("model file: sum weights/children mismatch");
        }
        if (node.type == NodeType::Max) {
            node.var = rec.at("var").get<VarId>();
            node.edge_labels = rec.at("labels").get<std::vector<int>>();
        }
        if (node.type == NodeType::CategoricalLeaf) {
            node.var = rec.at("var").get<VarId>();
            for (const json& p : rec.at("probs")) node.probs.push_back(parse_double(p.get<std::string>()));
        }
        if (node.type == NodeType::UtilityLeaf) {
            node.var = rec.at("var").get<VarId>();
            node.value = parse_double(rec.at("value").get<std::string>());
        }
        if (node.type == NodeType::LatentInterface)
            node.interface_index = rec.at("interface_index").get<int>();
        net.nodes[static_cast<std::size_t>(id)] = std::move(node);
    }
    return net;
}

const char* var_kind_name(VarKind k) {
    switch (k) {
        case VarKind::State: return "state";
        case VarKind::Decision: return "decision";
        case VarKind::Utility: return "utility";
    }
    return "?";
}

VarKind var_kind_from_name(const std::string& s) {
    if (s == "state") return VarKind::State;
    if (s == "decision") return VarKind::Decision;
    if (s == "utility") return VarKind::Utility;
    throw std::runtime_error("model file: unknown variable kind '" + s + "'");
}

}  // namespace

std::string serialize_model(const RspmnModel& model) {
    json j;
    j["version"] = kModelVersion;

    json vars = json::array();
    for (const VariableMeta& v : model.variables) {
        json rec;
        rec["name"] = v.name;
        rec["kind"] = var_kind_name(v.kind);
        rec["cardinality"] = v.cardinality;
        rec["slot"] = v.slot;
        vars.push_back(std::move(rec));
    }
    j["variables"] = std::move(vars);

    json order = json::array();
    for (const Slot& slot : model.partial_order.slots) {
        json rec;
        if (slot.is_decision) {
            rec["decision"] = model.variables.at(static_cast<std::size_t>(slot.decision_var)).name;
        } else {
            json names = json::array();
            for (VarId v : slot.info_vars) names.push_back(model.variables.at(static_cast<std::size_t>(v)).name);
            rec["info"] = std::move(names);
        }
        order.push_back(std::move(rec));
    }
    j["partial_order"] = std::move(order);

    j["top"] = {{"root", model.top.network.roots.empty() ? -1 : model.top.network.roots[0]},
                {"nodes", nodes_to_json(model.top.network)}};

    json bijection = json::array();
    for (NodeId leaf : model.temp.latent_leaves)
        bijection.push_back(model.temp.network.at(leaf).interface_index);
    j["template"] = {{"interface_roots", model.temp.network.roots},
                     {"latent_leaves", model.temp.latent_leaves},
                     {"bijection", std::move(bijection)},
                     {"nodes", nodes_to_json(model.temp.network)}};
    if (!model.unreferenced_interface_roots.empty())
        j["unreferenced_interface_roots"] = model.unreferenced_interface_roots;
    return j.dump(2) + "\n";
}

RspmnModel deserialize_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("model file: malformed JSON: ") + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != kModelVersion)
        throw std::runtime_error("model file: version mismatch");

    RspmnModel model;
    for (const json& rec : j.at("variables")) {
        VariableMeta v;
        v.name = rec.at("name").get<std::string>();
        v.kind = var_kind_from_name(rec.at("kind").get<std::string>());
        v.cardinality = rec.at("cardinality").get<int>();
        v.slot = rec.at("slot").get<int>();
        model.variables.push_back(std::move(v));
    }
    auto var_by_name = [&](const std::string& name) -> VarId {
        for (std::size_t i = 0; i < model.variables.size(); ++i)
            if (model.variables[i].name == name) return static_cast<VarId>(i);
        throw std::runtime_error("model file: partial order names unknown variable '" + name + "'");
    };
    for (const json& rec : j.at("partial_order")) {
        Slot slot;
        if (rec.contains("decision")) {
            slot.is_decision = true;
            slot.decision_var = var_by_name(rec["decision"].get<std::string>());
        } else {
            for (const json& name : rec.at("info")) slot.info_vars.push_back(var_by_name(name.get<std::string>()));
        }
        model.partial_order.slots.push_back(std::move(slot));
    }

    const int num_vars = static_cast<int>(model.variables.size());
    model.top.network = nodes_from_json(j.at("top").at("nodes"), num_vars);
    model.top.network.roots = {j.at("top").at("root").get<NodeId>()};

    const json& t = j.at("template");
    model.temp.network = nodes_from_json(t.at("nodes"), num_vars);
    model.temp.network.roots = t.at("interface_roots").get<std::vector<NodeId>>();
    model.temp.latent_leaves = t.at("latent_leaves").get<std::vector<NodeId>>();
    if (model.temp.network.roots.empty())
        throw std::runtime_error("model file: no interface roots");
    const auto bijection = t.at("bijection").get<std::vector<int>>();
    if (bijection.size() != model.temp.latent_leaves.size())
        throw std::runtime_error("model file: bijection/latent_leaves size mismatch");
    for (std::size_t i = 0; i < bijection.size(); ++i) {
        const Node& leaf = model.temp.network.at(model.temp.latent_leaves[i]);
        if (leaf.type != NodeType::LatentInterface || leaf.interface_index != bijection[i])
            throw std::runtime_error("model file: bijection disagrees with latent leaf indices");
    }
    if (j.contains("unreferenced_interface_roots"))
        model.unreferenced_interface_roots = j["unreferenced_interface_roots"].get<std::vector<int>>();

    ValidityReport temp_report = check_template_sound(model.temp);
    if (!temp_report.structure_ok.pass)
        throw std::runtime_error("model file: template violates structural invariants\n" +
                                 temp_report.to_string());
    ValidityReport top_report = check_top_valid(model.top);
    if (!top_report.structure_ok.pass || !top_report.top_valid.pass)
        throw std::runtime_error("model file: top network violates structural invariants\n" +
                                 top_report.to_string());
    return model;
}

void save_model(const RspmnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << serialize_model(model);
}

RspmnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(text);
}

}  // namespace rspmn
