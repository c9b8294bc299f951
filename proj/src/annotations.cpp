#include "nodulekit/annotations.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "nodulekit/errors.hpp"
#include "nodulekit/xml.hpp"

namespace nodulekit {

namespace {

int parse_int(std::string_view text, const char* what) {
    // trim surrounding whitespace
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data() + b, text.data() + e, value);
    if (ec != std::errc() || ptr != text.data() + e)
        throw XmlSyntaxError(std::string(what) + ": '" + std::string(text) +
                             "' is not an integer");
    return value;
}

int require_int_attr(const xml::Element& el, const char* key) {
    const std::string* v = el.attr(key);
    if (!v) throw XmlSyntaxError("<" + el.name + "> missing attribute '" + key + "'");
    return parse_int(*v, key);
}

IVec3 parse_locus(const xml::Element& el) {
    return {require_int_attr(el, "x"), require_int_attr(el, "y"), require_int_attr(el, "z")};
}

NoduleReading parse_nodule(const xml::Element& el) {
    NoduleReading reading;
    if (const std::string* id = el.attr("id")) reading.nodule_id = *id;
    bool have_rating = false;
    for (const auto& child : el.children) {
        if (child.name == "malignancy") {
            const int rating = parse_int(child.text, "malignancy");
            if (rating < 1 || rating > 5)
                throw RatingOutOfRange("malignancy " + std::to_string(rating) +
                                       " outside 1..5");
            reading.malignancy = rating;
            have_rating = true;
        } else if (child.name == "roi") {
            Roi roi;
            roi.slice_index = require_int_attr(child, "sliceIndex");
            for (const auto& edge : child.children) {
                if (edge.name != "edge") continue;
                roi.vertices.emplace_back(require_int_attr(edge, "x"),
                                          require_int_attr(edge, "y"));
            }
            if (roi.vertices.empty())
                throw EmptyPolygon("roi at slice " + std::to_string(roi.slice_index) +
                                   " has no vertices");
            reading.rois.push_back(std::move(roi));
        }
        // anything else is ignored
    }
    if (!have_rating)
        throw XmlSyntaxError("<nodule> without <malignancy>");
    return reading;
}

}  // namespace

AnnotationSet parse_annotations(std::string_view xml_bytes) {
    const xml::Element root = xml::parse(xml_bytes);
    if (root.name != "annotations")
        throw XmlSyntaxError("root element is <" + root.name + ">, expected <annotations>");

    AnnotationSet set;
    if (const std::string* pid = root.attr("patient_id")) set.patient_id = *pid;

    for (const auto& el : root.children) {
        if (el.name != "readingSession") continue;
        ReadingSession session;
        for (const auto& child : el.children) {
            if (child.name == "nodule") {
                session.nodules.push_back(parse_nodule(child));
            } else if (child.name == "smallNodule") {
                session.small_nodules.push_back(parse_locus(child));
            } else if (child.name == "nonNodule") {
                session.non_nodules.push_back(parse_locus(child));
            }
        }
        set.sessions.push_back(std::move(session));
    }

    if (set.sessions.empty())
        set.warnings.push_back("no reading sessions");
    else if (set.sessions.size() > 4)
        set.warnings.push_back("more than 4 reading sessions (" +
                               std::to_string(set.sessions.size()) + ")");
    return set;
}

std::string serialize_annotations(const AnnotationSet& set) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<annotations patient_id=\"" << xml::escape(set.patient_id) << "\">\n";
    for (const auto& session : set.sessions) {
        out << "  <readingSession>\n";
        for (const auto& nodule : session.nodules) {
            out << "    <nodule id=\"" << xml::escape(nodule.nodule_id) << "\">\n";
            out << "      <malignancy>" << nodule.malignancy << "</malignancy>\n";
            for (const auto& roi : nodule.rois) {
                out << "      <roi sliceIndex=\"" << roi.slice_index << "\">";
                for (const auto& [x, y] : roi.vertices)
                    out << "<edge x=\"" << x << "\" y=\"" << y << "\"/>";
                out << "</roi>\n";
            }
            out << "    </nodule>\n";
        }
        for (const auto& p : session.small_nodules)
            out << "    <smallNodule x=\"" << p.x << "\" y=\"" << p.y << "\" z=\"" << p.z
                << "\"/>\n";
        for (const auto& p : session.non_nodules)
            out << "    <nonNodule x=\"" << p.x << "\" y=\"" << p.y << "\" z=\"" << p.z
                << "\"/>\n";
        out << "  </readingSession>\n";
    }
    out << "</annotations>";
    return out.str();
}

std::vector<std::string> validate_bounds(const AnnotationSet& set, const Dims& dims) {
    std::vector<std::string> problems;
    const auto check = [&](int x, int y, int z, const std::string& what) {
        if (!dims.contains(x, y, z))
            problems.push_back(what + " (" + std::to_string(x) + "," + std::to_string(y) +
                               "," + std::to_string(z) + ") outside volume");
    };
    for (std::size_t s = 0; s < set.sessions.size(); ++s) {
        const auto& session = set.sessions[s];
        const std::string tag = "session " + std::to_string(s);
        for (const auto& nodule : session.nodules)
            for (const auto& roi : nodule.rois)
                for (const auto& [x, y] : roi.vertices)
                    check(x, y, roi.slice_index, tag + " nodule " + nodule.nodule_id + " vertex");
        for (const auto& p : session.small_nodules)
            check(p.x, p.y, p.z, tag + " smallNodule");
        for (const auto& p : session.non_nodules)
            check(p.x, p.y, p.z, tag + " nonNodule");
    }
    return problems;
}

}  // namespace nodulekit
