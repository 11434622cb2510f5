package tools.descartes.teastore.persistence.daemons;

/**
 * Generates the store database and tracks whether the store is in maintenance.
 */
public final class DataGenerator {

    public static final DataGenerator GENERATOR = new DataGenerator();

    private boolean maintenanceMode = false;
    private int generatedCategories = 0;

    private DataGenerator() {
    }

    public boolean isMaintenanceMode() {
        return maintenanceMode;
    }

    public void setMaintenanceModeGlobal(boolean maintenanceMode) {
        setMaintenanceModeInternal(maintenanceMode);
    }

    private synchronized void setMaintenanceModeInternal(boolean maintenanceMode) {
        this.maintenanceMode = maintenanceMode;
    }

    public int getGeneratedCategories() {
        return generatedCategories;
    }

    public void generateDatabaseContent(int categories) {
        for (int i = 0; i < categories; i++) {
            generatedCategories = generatedCategories + 1;
        }
    }
}
