pub mod audit;
pub mod lowerbounds;
pub mod run;
pub mod stability;
pub mod verify;
