pub mod driver;
pub mod instance;
pub mod report;
