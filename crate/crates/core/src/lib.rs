pub mod bench;
pub mod gate;
pub mod orchestrator;
pub mod pddl;
pub mod planner;
pub mod tools;
pub mod translator;
pub mod world;
