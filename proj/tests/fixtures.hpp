#pragma once

// Shared test fixtures: canonical structured outputs and their raw forms.

#include <string>

namespace fixtures {

// The washing-machine planning answer, in the raw shape models emit it
// (lowercase tags, tight quoting).
inline const char* kWashingMachineRaw =
    "<response>I will put the dirty clothes in the washing machine</response>\n"
    "<plans>\n"
    "1.[manipulate] Locate the dirty clothes in the basket\n"
    "2.[navigate] Navigate to the basket\n"
    "3.[manipulate] Pick up the dirty clothes\n"
    "4.[navigate] Navigate to the washing machine\n"
    "5.[manipulate] Place the dirty clothes in the washing machine\n"
    "</plans>\n"
    "<actions>\n"
    "[['Search','Dirty clothes'], ['Navigate','Basket'], ['Pick','Dirty clothes'], "
    "['Navigate','Washing machine'], ['Place','Dirty clothes','Washing machine']]\n"
    "</actions>";

// Same plan with the two manipulation actions swapped in the actions list.
inline const char* kWashingMachinePermutedRaw =
    "<response>I will put the dirty clothes in the washing machine</response>\n"
    "<plans>\n"
    "1.[manipulate] Locate the dirty clothes in the basket\n"
    "2.[navigate] Navigate to the basket\n"
    "3.[manipulate] Pick up the dirty clothes\n"
    "4.[navigate] Navigate to the washing machine\n"
    "5.[manipulate] Place the dirty clothes in the washing machine\n"
    "</plans>\n"
    "<actions>\n"
    "[['Search','Dirty clothes'], ['Navigate','Basket'], ['Place','Dirty clothes','Washing machine'], "
    "['Navigate','Washing machine'], ['Pick','Dirty clothes']]\n"
    "</actions>";

// Cargo-strap conversion gone wrong: six actions, Repeat/Continue are not
// atomic verbs, and the actions tag never closes. A response section is
// prepended so all three sections are present.
inline const char* kCargoIncorrectRaw =
    "<response>I will inspect and tighten the cargo straps</response>"
    "<plans>1.[Navigate] Navigate to the First Cargo Section\n"
    "2.[Find] Visually Inspect the Cargo Straps for Tightness\n"
    "3.[Adjust] Adjust any Loose Straps\n"
    "4.[Navigate] Move to the Next Cargo Section\n"
    "5.[Repeat] Repeat the Inspection and Adjustment Process\n"
    "6.[Continue] Continue Until All Sections are Checked</plans>"
    "<actions>[['Navigate', 'First Cargo Section'], ['Find', 'Cargo Straps'], "
    "['Adjust', 'Loose Straps'], ['Navigate', 'Next Cargo Section'], "
    "['Repeat', 'Inspection and Adjustment Process'], ['Continue', 'All Sections']]";

inline std::string minimal_output(const std::string& actions_body) {
  return "<response>ok</response>\n<plans>\n</plans>\n<actions>\n" + actions_body + "\n</actions>";
}

}  // namespace fixtures
