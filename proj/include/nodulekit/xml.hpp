#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nodulekit::xml {

// Minimal DOM for the annotation subset. Supports elements, attributes,
// character data, comments, processing instructions, and the five standard
// entities plus numeric references. Anything malformed, including any
// truncation, raises XmlSyntaxError; the parser never reads out of bounds.
struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Element> children;
    std::string text;  // character data directly inside this element

    const std::string* attr(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key) return &v;
        return nullptr;
    }
    const Element* child(std::string_view tag) const {
        for (const auto& c : children)
            if (c.name == tag) return &c;
        return nullptr;
    }
};

// Parses a complete document and returns its root element.
Element parse(std::string_view bytes);

// Escapes &, <, >, ", ' for use in attribute values and text.
std::string escape(std::string_view raw);

}  // namespace nodulekit::xml
