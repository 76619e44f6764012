pub mod constants;
pub mod estimate;
pub mod simulate;
pub mod verify;
