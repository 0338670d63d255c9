#pragma once

// Minimal JSON Schema checker covering the subset the shipped schemas use:
// type (including union arrays), enum, required, properties, patternProperties,
// additionalProperties (boolean or schema), items, minimum, minLength.

#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

namespace schemacheck {

inline bool matches_type(const nlohmann::json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "number") return value.is_number();
    if (type == "integer")
        return value.is_number_integer() || value.is_number_unsigned();
    return false;
}

inline void validate_at(const nlohmann::json& value, const nlohmann::json& schema,
                        const std::string& path, std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const nlohmann::json& t = schema.at("type");
        bool ok = false;
        if (t.is_string()) {
            ok = matches_type(value, t.get<std::string>());
        } else {
            for (const auto& alt : t)
                if (matches_type(value, alt.get<std::string>())) ok = true;
        }
        if (!ok) {
            errors.push_back(path + ": type mismatch, got " + std::string(value.type_name()));
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& alt : schema.at("enum"))
            if (value == alt) ok = true;
        if (!ok) errors.push_back(path + ": value " + value.dump() + " not in enum");
    }
    if (schema.contains("minimum") && value.is_number()) {
        if (value.get<double>() < schema.at("minimum").get<double>())
            errors.push_back(path + ": " + value.dump() + " below minimum");
    }
    if (schema.contains("minLength") && value.is_string()) {
        if (value.get<std::string>().size() < schema.at("minLength").get<std::size_t>())
            errors.push_back(path + ": string shorter than minLength");
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema.at("required"))
                if (!value.contains(key.get<std::string>()))
                    errors.push_back(path + ": missing required key '" +
                                     key.get<std::string>() + "'");
        }
        for (const auto& [key, child] : value.items()) {
            const std::string child_path = path + "/" + key;
            bool matched = false;
            if (schema.contains("properties") && schema.at("properties").contains(key)) {
                matched = true;
                validate_at(child, schema.at("properties").at(key), child_path, errors);
            }
            if (schema.contains("patternProperties")) {
                for (const auto& [pattern, sub] : schema.at("patternProperties").items()) {
                    if (std::regex_search(key, std::regex(pattern))) {
                        matched = true;
                        validate_at(child, sub, child_path, errors);
                    }
                }
            }
            if (!matched && schema.contains("additionalProperties")) {
                const nlohmann::json& extra = schema.at("additionalProperties");
                if (extra.is_boolean()) {
                    if (!extra.get<bool>())
                        errors.push_back(path + ": unexpected key '" + key + "'");
                } else {
                    validate_at(child, extra, child_path, errors);
                }
            }
        }
    }
    if (value.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < value.size(); ++i)
            validate_at(value[i], schema.at("items"), path + "/" + std::to_string(i), errors);
    }
}

inline std::vector<std::string> validate_json(const nlohmann::json& value,
                                              const nlohmann::json& schema) {
    std::vector<std::string> errors;
    validate_at(value, schema, "#", errors);
    return errors;
}

}  // namespace schemacheck
