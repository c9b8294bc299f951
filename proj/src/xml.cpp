#include "nodulekit/xml.hpp"

#include <cctype>

#include "nodulekit/errors.hpp"

namespace nodulekit::xml {

namespace {

struct Cursor {
    std::string_view s;
    std::size_t pos = 0;

    bool eof() const { return pos >= s.size(); }
    char peek() const { return eof() ? '\0' : s[pos]; }
    char get() {
        if (eof()) throw XmlSyntaxError("unexpected end of document");
        return s[pos++];
    }
    bool starts_with(std::string_view lit) const {
        return s.substr(pos, lit.size()) == lit;
    }
    void expect(char c) {
        if (eof() || s[pos] != c)
            throw XmlSyntaxError(std::string("expected '") + c + "' at offset " +
                                 std::to_string(pos));
        ++pos;
    }
    void skip_ws() {
        while (!eof() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r' || s[pos] == '\n'))
            ++pos;
    }
};

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}
bool is_name_char(char c) {
    return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) ||
           c == '-' || c == '.';
}

std::string read_name(Cursor& c) {
    if (c.eof() || !is_name_start(c.peek()))
        throw XmlSyntaxError("expected name at offset " + std::to_string(c.pos));
    std::string name;
    while (!c.eof() && is_name_char(c.peek())) name.push_back(c.get());
    return name;
}

void append_entity(Cursor& c, std::string& out) {
    // c is positioned just after '&'
    std::string ent;
    while (!c.eof() && c.peek() != ';') {
        ent.push_back(c.get());
        if (ent.size() > 10) throw XmlSyntaxError("entity too long");
    }
    c.expect(';');
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else if (!ent.empty() && ent[0] == '#') {
        long code = 0;
        std::size_t i = 1;
        const bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
        if (hex) i = 2;
        if (i >= ent.size()) throw XmlSyntaxError("empty character reference");
        for (; i < ent.size(); ++i) {
            const char d = ent[i];
            int v;
            if (d >= '0' && d <= '9') v = d - '0';
            else if (hex && d >= 'a' && d <= 'f') v = d - 'a' + 10;
            else if (hex && d >= 'A' && d <= 'F') v = d - 'A' + 10;
            else throw XmlSyntaxError("bad character reference");
            code = code * (hex ? 16 : 10) + v;
            if (code > 0x10FFFF) throw XmlSyntaxError("character reference out of range");
        }
        if (code < 0x80) {
            out.push_back(static_cast<char>(code));
        } else if (code < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (code >> 6)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        } else if (code < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (code >> 12)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (code >> 18)));
            out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
        }
    } else {
        throw XmlSyntaxError("unknown entity '&" + ent + ";'");
    }
}

std::string read_attr_value(Cursor& c) {
    const char quote = c.get();
    if (quote != '"' && quote != '\'') throw XmlSyntaxError("attribute value must be quoted");
    std::string value;
    for (;;) {
        if (c.eof()) throw XmlSyntaxError("unterminated attribute value");
        const char ch = c.get();
        if (ch == quote) break;
        if (ch == '<') throw XmlSyntaxError("'<' in attribute value");
        if (ch == '&') append_entity(c, value);
        else value.push_back(ch);
    }
    return value;
}

void skip_comment(Cursor& c) {
    // c is positioned just after "<!--"
    while (!c.starts_with("-->")) {
        if (c.eof()) throw XmlSyntaxError("unterminated comment");
        ++c.pos;
    }
    c.pos += 3;
}

void skip_pi(Cursor& c) {
    // c is positioned just after "<?"
    while (!c.starts_with("?>")) {
        if (c.eof()) throw XmlSyntaxError("unterminated processing instruction");
        ++c.pos;
    }
    c.pos += 2;
}

void skip_misc(Cursor& c) {
    for (;;) {
        c.skip_ws();
        if (c.starts_with("<!--")) {
            c.pos += 4;
            skip_comment(c);
        } else if (c.starts_with("<?")) {
            c.pos += 2;
            skip_pi(c);
        } else {
            return;
        }
    }
}

Element parse_element(Cursor& c, int depth) {
    if (depth > 64) throw XmlSyntaxError("document nested too deeply");
    c.expect('<');
    Element el;
    el.name = read_name(c);

    // attributes
    for (;;) {
        c.skip_ws();
        if (c.eof()) throw XmlSyntaxError("unterminated start tag");
        if (c.peek() == '/' || c.peek() == '>') break;
        std::string key = read_name(c);
        c.skip_ws();
        c.expect('=');
        c.skip_ws();
        el.attributes.emplace_back(std::move(key), read_attr_value(c));
    }
    if (c.peek() == '/') {
        ++c.pos;
        c.expect('>');
        return el;
    }
    c.expect('>');

    // content
    for (;;) {
        if (c.eof()) throw XmlSyntaxError("unterminated element <" + el.name + ">");
        if (c.peek() == '<') {
            if (c.starts_with("</")) {
                c.pos += 2;
                const std::string name = read_name(c);
                if (name != el.name)
                    throw XmlSyntaxError("mismatched close tag </" + name + "> for <" +
                                         el.name + ">");
                c.skip_ws();
                c.expect('>');
                return el;
            }
            if (c.starts_with("<!--")) {
                c.pos += 4;
                skip_comment(c);
            } else if (c.starts_with("<?")) {
                c.pos += 2;
                skip_pi(c);
            } else if (c.starts_with("<!")) {
                throw XmlSyntaxError("declarations are not supported here");
            } else {
                el.children.push_back(parse_element(c, depth + 1));
            }
        } else {
            const char ch = c.get();
            if (ch == '&') append_entity(c, el.text);
            else el.text.push_back(ch);
        }
    }
}

}  // namespace

Element parse(std::string_view bytes) {
    Cursor c{bytes};
    // byte-order mark
    if (c.starts_with("\xEF\xBB\xBF")) c.pos += 3;
    skip_misc(c);
    if (c.starts_with("<!DOCTYPE")) {
        while (!c.eof() && c.peek() != '>') ++c.pos;
        c.expect('>');
        skip_misc(c);
    }
    if (c.eof() || c.peek() != '<') throw XmlSyntaxError("no root element");
    Element root = parse_element(c, 0);
    skip_misc(c);
    if (!c.eof()) throw XmlSyntaxError("trailing content after root element");
    return root;
}

std::string escape(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (const char ch : raw) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

}  // namespace nodulekit::xml
