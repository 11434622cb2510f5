package tools.descartes.teastore.persistence.repository;

/**
 * Persisted category entity.
 */
public class PersistenceCategory {

    private long id;
    private String name;

    public long getId() {
        return id;
    }

    public String getName() {
        return name;
    }
}
