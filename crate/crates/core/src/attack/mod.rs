pub mod phase1;
pub mod phase2;
pub mod phase3;
