#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace conav {

// The four discrete navigation primitives. No diagonal or continuous motion.
enum class Action { MoveForward, TurnRight90, TurnLeft90, Stop };

constexpr std::array<Action, 4> kAllActions = {
    Action::MoveForward, Action::TurnRight90, Action::TurnLeft90,
    Action::Stop};

std::string to_string(Action a);
Action action_from_string(const std::string& s);
bool is_turn(Action a);

// Agent pose on the coordinate grid. Heading is a cardinal angle in degrees
// (0/90/180/270), counter-clockwise from +x.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  int heading = 0;

  bool operator==(const Pose& o) const {
    return x == o.x && y == o.y && heading == o.heading;
  }
  bool operator!=(const Pose& o) const { return !(*this == o); }
};

int normalize_heading(int deg);

// Exact unit direction (dx, dy) for a cardinal heading. Throws on
// non-cardinal input.
std::pair<int, int> heading_unit(int heading);

// Wraps an angle in degrees into [-180, 180).
double norm180(double deg);

// Relative bearing of point (tx, ty) seen from `pose`, in [-180, 180).
// 0 means straight ahead.
double bearing_from(const Pose& pose, double tx, double ty);

double euclid(double ax, double ay, double bx, double by);

// View directions in the order the percept quadrature uses them.
enum class ViewDir { Front = 0, Right = 1, Back = 2, Left = 3 };

constexpr std::array<ViewDir, 4> kAllViews = {ViewDir::Front, ViewDir::Right,
                                              ViewDir::Back, ViewDir::Left};

std::string to_string(ViewDir v);
ViewDir view_from_string(const std::string& s);

// Center bearing of a view relative to the agent heading (front=0, right=-90,
// back=180, left=+90).
double view_center(ViewDir v);

}  // namespace conav
