#pragma once

#include <istream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace idoc::cli {

/// Reads JSON config files for CLI11. Nested objects name subcommands:
/// {"threads": 2, "search": {"top-k": 10}}.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override
    {
        return {};
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override
    {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(input);
        } catch (const nlohmann::json::parse_error& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) {
            throw CLI::ConversionError("config file must hold a JSON object");
        }
        std::vector<CLI::ConfigItem> items;
        flatten(doc, {}, items);
        return items;
    }

private:
    static std::string scalar(const nlohmann::json& v)
    {
        if (v.is_string()) {
            return v.get<std::string>();
        }
        return v.dump();
    }

    static void flatten(const nlohmann::json& node, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& items)
    {
        for (const auto& [key, value] : node.items()) {
            if (value.is_object()) {
                std::vector<std::string> deeper = parents;
                deeper.push_back(key);
                flatten(value, deeper, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& element : value) {
                    item.inputs.push_back(scalar(element));
                }
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
    }
};

}  // namespace idoc::cli
