#pragma once
// Symbolic robot plans read off a visual plan, in the function-call syntax
// Grasp / Rotate / Flip / Place_at with Bbox(name, image_k) parameters.

#include <json.hpp>
#include <string>
#include <variant>
#include <vector>

#include "simip/errors.hpp"
#include "simip/planner.hpp"

namespace simip {

struct BboxRef {
    std::string entity;  // object or compartment name
    std::string image;   // "image_k", k from 1
    BBox box;            // value read off that image
    friend bool operator==(const BboxRef&, const BboxRef&) = default;
};

struct GraspCmd {
    std::string class_label;
    BboxRef bbox;
    friend bool operator==(const GraspCmd&, const GraspCmd&) = default;
};

struct RotateCmd {
    std::string object;
    int angle = 0;  // minimal signed angle in (-180,180]
    friend bool operator==(const RotateCmd&, const RotateCmd&) = default;
};

struct FlipCmd {
    std::string object;
    friend bool operator==(const FlipCmd&, const FlipCmd&) = default;
};

struct PlaceAtCmd {
    std::string class_label;  // "compartment" or the class of the receiving object
    BboxRef bbox;
    Point center;  // where the carried footprint's bbox center lands
    friend bool operator==(const PlaceAtCmd&, const PlaceAtCmd&) = default;
};

using SymbolicCommand = std::variant<GraspCmd, RotateCmd, FlipCmd, PlaceAtCmd>;

struct SymbolicPlan {
    std::vector<SymbolicCommand> commands;
    std::vector<std::string> image_refs;  // image_1 .. image_n

    // Line-oriented listing in the Grasp(...)/Place_at(...) call syntax.
    std::string listing() const;
    nlohmann::json to_json() const;
    static SymbolicPlan from_json(const nlohmann::json& j);
    friend bool operator==(const SymbolicPlan&, const SymbolicPlan&) = default;
};

// Refuses (ErrorKind::Refused) plans that carry an unvalidated step.
SymbolicPlan parse(const Plan& plan);

class ReplayError : public Error {
public:
    ReplayError(std::size_t command, ErrorKind kind, const std::string& what)
        : Error(kind, "command " + std::to_string(command + 1) + ": " + what), command_(command) {}
    std::size_t command() const { return command_; }

private:
    std::size_t command_;
};

// Applies the commands through the imagination module, checking every Bbox
// parameter against the replayed image and validating every placement.
Scene replay(const Scene& initial, const SymbolicPlan& splan, int threshold = -1);

// One sentence per command; "nothing needs to be done" for an empty plan.
std::string to_text(const SymbolicPlan& splan);

}  // namespace simip
